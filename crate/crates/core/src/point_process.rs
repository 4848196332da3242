//! Marked point configurations, their metrics, Poisson sampling and the
//! Poisson-approximation bound evaluators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::special::ln_gamma;

/// A point (θ, v, f) of [0, 2π) × ℝ × C([−2πk1, 0], ℂ), with f stored at
/// mesh pitch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub theta: f64,
    pub v: f64,
    #[serde(with = "pairs")]
    pub f: Vec<Complex64>,
}

mod pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let p: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        p.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let p: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(p.into_iter().map(|[a, b]| Complex64::new(a, b)).collect())
    }
}

impl MarkedPoint {
    pub fn new(theta: f64, v: f64, f: Vec<Complex64>) -> Self {
        Self {
            theta: theta.rem_euclid(TAU),
            v,
            f,
        }
    }
}

/// Arc distance on ℝ/2πℤ.
#[inline]
pub fn arc_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// ∂0(a, b) = min(1, d_Θ(θ_a, θ_b) + |v_a − v_b| + sup|f_a − f_b|).
pub fn dist_point(a: &MarkedPoint, b: &MarkedPoint) -> Result<f64> {
    if a.f.len() != b.f.len() {
        return Err(invalid("decoration", format!("window lengths differ: {} vs {}", a.f.len(), b.f.len())));
    }
    let sup = a
        .f
        .iter()
        .zip(&b.f)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok((arc_distance(a.theta, b.theta) + (a.v - b.v).abs() + sup).min(1.0))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointConfiguration {
    pub points: Vec<MarkedPoint>,
}

impl PointConfiguration {
    pub fn new(points: Vec<MarkedPoint>) -> Self {
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn cost_matrix(x: &PointConfiguration, y: &PointConfiguration) -> Result<Vec<Vec<f64>>> {
    x.points
        .iter()
        .map(|a| y.points.iter().map(|b| dist_point(a, b)).collect())
        .collect()
}

fn perfect_matching_below(cost: &[Vec<f64>], t: f64) -> bool {
    let n = cost.len();
    let mut match_of_col = vec![usize::MAX; n];
    fn augment(i: usize, cost: &[Vec<f64>], t: f64, seen: &mut [bool], mc: &mut [usize]) -> bool {
        for j in 0..cost.len() {
            if cost[i][j] <= t && !seen[j] {
                seen[j] = true;
                if mc[j] == usize::MAX || augment(mc[j], cost, t, seen, mc) {
                    mc[j] = i;
                    return true;
                }
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, cost, t, &mut seen, &mut match_of_col) {
            return false;
        }
    }
    true
}

/// min over permutations of max_i cost[i][π(i)].
pub fn bottleneck_assignment(cost: &[Vec<f64>]) -> f64 {
    if cost.is_empty() {
        return 0.0;
    }
    let mut vals: Vec<f64> = cost.iter().flatten().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.dedup();
    let (mut lo, mut hi) = (0, vals.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_below(cost, vals[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    vals[lo]
}

/// min over permutations of Σ_i cost[i][π(i)] (Hungarian method with
/// potentials) and the optimal assignment row → column.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, vec![]);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assign[i]]).sum();
    (total, assign)
}

/// (∂1, d1) between two configurations.
pub fn dist_config(x: &PointConfiguration, y: &PointConfiguration) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Ok((1.0, 1.0));
    }
    if x.is_empty() {
        return Ok((0.0, 0.0));
    }
    let c = cost_matrix(x, y)?;
    let b = bottleneck_assignment(&c);
    let (s, _) = min_cost_assignment(&c);
    Ok((b, s / x.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Both samplers read the same stream for each pair.
    SharedRandomness,
    /// Independent streams, paired and matched.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessDistance {
    pub coupling: Coupling,
    pub n_pairs: usize,
    /// Mean ∂1 under the coupling, an upper bound for ∂2.
    pub partial2_upper: f64,
    pub partial2_se: f64,
    /// Mean d1 under the coupling, an upper bound for d2.
    pub d2_upper: f64,
    pub d2_se: f64,
}

/// Upper-bound estimates of ∂2 and d2 from one explicit coupling.
pub fn dist_process_estimate<P, Q>(sample_p: P, sample_q: Q, n_pairs: usize, seed: u64, coupling: Coupling) -> Result<ProcessDistance>
where
    P: Fn(&mut RngStream) -> PointConfiguration,
    Q: Fn(&mut RngStream) -> PointConfiguration,
{
    let mut d1s = Vec::with_capacity(n_pairs);
    let mut dds = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs as u64 {
        let mut sp = RngStream::new(seed, 2 * i);
        let mut sq = match coupling {
            Coupling::SharedRandomness => RngStream::new(seed, 2 * i),
            Coupling::Independent => RngStream::new(seed, 2 * i + 1),
        };
        let x = sample_p(&mut sp);
        let y = sample_q(&mut sq);
        let (a, b) = dist_config(&x, &y)?;
        d1s.push(a);
        dds.push(b);
    }
    let se = |v: &[f64]| if v.len() > 1 { crate::stats::std_err(v) } else { 0.0 };
    Ok(ProcessDistance {
        coupling,
        n_pairs,
        partial2_upper: if n_pairs > 0 { crate::stats::mean(&d1s) } else { 0.0 },
        partial2_se: se(&d1s),
        d2_upper: if n_pairs > 0 { crate::stats::mean(&dds) } else { 0.0 },
        d2_se: se(&dds),
    })
}

/// A finite measure on Γ given by weighted atoms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    pub atoms: Vec<(MarkedPoint, f64)>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(MarkedPoint, f64)>) -> Self {
        Self { atoms }
    }

    pub fn dirac(p: MarkedPoint) -> Self {
        Self::new(vec![(p, 1.0)])
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.atoms.iter().map(|(p, w)| (p.clone(), c * w)).collect())
    }

    pub fn integrate(&self, f: &TestFunction) -> f64 {
        self.atoms.iter().map(|(p, w)| w * f.eval(p)).sum()
    }
}

/// Test functions with values in [0, 1] that are 1-Lipschitz for ∂0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    Constant,
    /// 1 − min(1, d_Θ(θ, center))
    ThetaTent { center: f64 },
    /// clamp(v − c, 0, 1)
    VClip { c: f64 },
    /// clamp(|f(t_index)| − c, 0, 1); `index = None` uses the sup-norm.
    DecorationClip { index: Option<f64>, c: f64 },
    /// ∂0(x, a)
    DistanceTo(MarkedPoint),
    Product(Box<TestFunction>, Box<TestFunction>),
}

impl TestFunction {
    pub fn eval(&self, x: &MarkedPoint) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::ThetaTent { center } => 1.0 - arc_distance(x.theta, *center).min(1.0),
            TestFunction::VClip { c } => (x.v - c).clamp(0.0, 1.0),
            TestFunction::DecorationClip { index, c } => {
                let m = match index {
                    None => x.f.iter().map(|z| z.norm()).fold(0.0, f64::max),
                    Some(frac) if !x.f.is_empty() => {
                        let i = ((x.f.len() - 1) as f64 * frac.clamp(0.0, 1.0)).round() as usize;
                        x.f[i].norm()
                    }
                    Some(_) => 0.0,
                };
                (m - c).clamp(0.0, 1.0)
            }
            TestFunction::DistanceTo(a) => dist_point(x, a).unwrap_or(1.0),
            TestFunction::Product(f, g) => f.eval(x) * g.eval(x),
        }
    }
}

/// The default dictionary: 64 θ-tents, 32 v-clips, 16 decoration clips,
/// θ×v and v×decoration products, and the constant.
pub fn default_dictionary(v_range: (f64, f64)) -> Vec<TestFunction> {
    let thetas: Vec<TestFunction> = (0..64)
        .map(|i| TestFunction::ThetaTent {
            center: TAU * i as f64 / 64.0,
        })
        .collect();
    let (vlo, vhi) = v_range;
    let vs: Vec<TestFunction> = (0..32)
        .map(|i| TestFunction::VClip {
            c: vlo + (vhi - vlo) * i as f64 / 31.0 - 1.0,
        })
        .collect();
    let mut decos = vec![];
    for idx in [None, Some(0.0), Some(0.5), Some(1.0)] {
        for c in [0.0, 0.5, 1.0, 2.0] {
            decos.push(TestFunction::DecorationClip { index: idx, c });
        }
    }
    let mut dict = vec![TestFunction::Constant];
    dict.extend(thetas.iter().cloned());
    dict.extend(vs.iter().cloned());
    dict.extend(decos.iter().cloned());
    for t in &thetas {
        for v in &vs {
            dict.push(TestFunction::Product(Box::new(t.clone()), Box::new(v.clone())));
        }
    }
    for v in &vs {
        for d in &decos {
            dict.push(TestFunction::Product(Box::new(v.clone()), Box::new(d.clone())));
        }
    }
    dict
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlEstimate {
    /// max over the dictionary, a lower bound for d_BL.
    pub lower_bound: f64,
    pub dictionary_size: usize,
}

/// Lower bound max_f |∫ f d(μ − ν)| over a finite dictionary.
pub fn d_bl(mu: &FiniteMeasure, nu: &FiniteMeasure, dictionary: &[TestFunction]) -> BlEstimate {
    let lb = dictionary
        .iter()
        .map(|f| (mu.integrate(f) - nu.integrate(f)).abs())
        .fold(0.0, f64::max);
    BlEstimate {
        lower_bound: lb,
        dictionary_size: dictionary.len(),
    }
}

/// A finite intensity: total mass Λ and a sampler for the normalised law.
pub struct FiniteIntensity<'a> {
    pub total_mass: f64,
    pub sampler: Box<dyn Fn(&mut RngStream) -> MarkedPoint + 'a>,
}

/// N ~ Poisson(Λ) iid points from the normalised intensity.
pub fn sample_poisson(intensity: &FiniteIntensity, stream: &mut RngStream) -> PointConfiguration {
    if !(intensity.total_mass > 0.0) {
        return PointConfiguration::empty();
    }
    let n = stream.poisson(intensity.total_mass);
    PointConfiguration::new((0..n).map(|_| (intensity.sampler)(stream)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpMoments {
    pub ep: f64,
    pub et: f64,
    pub etp: f64,
    pub l: f64,
}

/// C (Var + 3Λ)^{3/2} Σ_i (E P_i E T_i + E T_i P_i + (E P_i)²) / L_i²,
/// defined up to the universal constant C.
pub fn pp_bound(moments: &[PpMoments], var: f64, lambda: f64, c: f64) -> Result<f64> {
    let mut s = 0.0;
    for m in moments {
        if !(m.l > 0.0) {
            return Err(invalid("L", "must be positive"));
        }
        for x in [m.ep, m.et, m.etp] {
            if !x.is_finite() {
                return Err(invalid("moments", "must be finite"));
            }
        }
        s += (m.ep * m.et + m.etp + m.ep * m.ep) / (m.l * m.l);
    }
    if !(var.is_finite() && lambda.is_finite()) {
        return Err(invalid("moments", "must be finite"));
    }
    Ok(c * (var + 3.0 * lambda).powf(1.5) * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityBounds {
    pub alpha: f64,
    /// (1 − e^{−α})/α
    pub factor: f64,
    pub d2_bound: f64,
    pub partial2_bound: f64,
}

/// (1 − e^{−α})/α, continuous at α = 0.
pub fn ppcom_factor(alpha: f64) -> f64 {
    if alpha.abs() < 1e-8 {
        1.0 - alpha / 2.0 + alpha * alpha / 6.0
    } else {
        -(-alpha).exp_m1() / alpha
    }
}

pub fn intensity_change_bound(d_bl_value: f64, mass_pi: f64, mass_lambda: f64) -> Result<IntensityBounds> {
    if mass_pi < 0.0 || mass_lambda < 0.0 {
        return Err(invalid("mass", "masses must be nonnegative"));
    }
    let alpha = mass_pi.min(mass_lambda);
    let factor = ppcom_factor(alpha);
    let d2 = factor * d_bl_value;
    Ok(IntensityBounds {
        alpha,
        factor,
        d2_bound: d2,
        partial2_bound: 2f64.sqrt() * mass_pi.max(mass_lambda) * d2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    /// Debiased histogram estimate of d_TV.
    pub tv: f64,
    /// Raw histogram total variation.
    pub raw: f64,
    /// Batch-means standard error of `tv`.
    pub se: f64,
    /// e^{−2π²V}
    pub bound_shape: f64,
    pub bins: usize,
    pub samples: usize,
}

/// E|Bin(n, p)/n − p| (De Moivre).
fn binomial_mean_abs_dev(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    let nu = (nf * p).floor() + 1.0;
    if nu > nf {
        return 0.0;
    }
    let lc = ln_gamma(nf + 1.0) - ln_gamma(nu + 1.0) - ln_gamma(nf - nu + 1.0);
    2.0 * (nu.ln() + lc + nu * p.ln() + (nf - nu + 1.0) * (1.0 - p).ln()).exp() / nf
}

fn histogram_tv(angles: &[f64], bins: usize) -> f64 {
    let mut h = vec![0usize; bins];
    for a in angles {
        let b = ((a.rem_euclid(TAU) / TAU) * bins as f64) as usize;
        h[b.min(bins - 1)] += 1;
    }
    let n = angles.len() as f64;
    let u = 1.0 / bins as f64;
    0.5 * h.iter().map(|&c| (c as f64 / n - u).abs()).sum::<f64>()
}

fn debiased_tv(angles: &[f64], bins: usize) -> (f64, f64) {
    let raw = histogram_tv(angles, bins);
    let floor = 0.5 * bins as f64 * binomial_mean_abs_dev(angles.len(), 1.0 / bins as f64);
    ((raw - floor).max(0.0), raw)
}

/// Total variation between the phase 2π(α + Z), Z ~ N(0, V), and the
/// uniform law on the circle, from `n_samples` draws.
pub fn wrapped_gaussian_tv(v: f64, alpha: f64, n_samples: usize, bins: usize, stream: &mut RngStream) -> Result<TvEstimate> {
    if !(v > 0.0) {
        return Err(invalid("V", "must be positive"));
    }
    if bins < 2 || n_samples < 10 * bins {
        return Err(invalid("n_samples", "need at least 10 samples per bin"));
    }
    let sd = v.sqrt();
    let angles: Vec<f64> = (0..n_samples)
        .map(|_| TAU * (alpha + sd * stream.normal()))
        .collect();
    let (tv, raw) = debiased_tv(&angles, bins);
    let nb = 10;
    let chunk = n_samples / nb;
    let batch: Vec<f64> = (0..nb)
        .map(|b| debiased_tv(&angles[b * chunk..(b + 1) * chunk], bins).0)
        .collect();
    // batch estimates have nb times the variance of the full-sample one
    let se = crate::stats::std_dev(&batch) / (nb as f64).sqrt();
    Ok(TvEstimate {
        tv,
        raw,
        se,
        bound_shape: (-2.0 * PI * PI * v).exp(),
        bins,
        samples: n_samples,
    })
}
