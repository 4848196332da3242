//! Coupled decoration diffusions 𝔏_t(θ), 𝔘_t(θ) driven by one complex
//! Brownian motion, the decoration barrier events and decoration sampling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::extremes::{k1_hat, k1_plus, Decoration};
use crate::opuc::Sigma;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Initial condition supplied per θ, drift on the whole interval.
    MatchedInitial,
    /// Zero initial condition, drift switched on at T_†.
    FlatInitial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub beta: f64,
    pub k1: f64,
    pub sigma: Sigma,
    pub t_minus: f64,
    pub t_dagger: f64,
    pub t_plus: f64,
    /// Number of Euler steps on [T_−, T_+]; the grid always contains T_†.
    pub steps: usize,
    pub theta: Vec<f64>,
    pub k4: f64,
    pub k5: f64,
    /// Subtracted from 𝔘; sqrt(8/β) log k1⁺ by default.
    pub centering: f64,
    /// Force the diffusion coefficient to zero.
    pub zero_noise: bool,
}

impl SdeConfig {
    /// Times from k1, the lattice [−2πk1, 0] ∩ (2π/4k5)ℤ, 1000 steps.
    pub fn new(beta: f64, k1: f64, sigma: Sigma) -> Result<Self> {
        let mut c = Self::ray(beta, k1, sigma)?;
        c.theta = c.lattice();
        Ok(c)
    }

    /// As [`SdeConfig::new`] with the single ray θ = 0.
    pub fn ray(beta: f64, k1: f64, sigma: Sigma) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", "must be positive"));
        }
        if !(k1 > 1.0) {
            return Err(invalid("k1", "must exceed 1"));
        }
        let t_plus = k1.ln();
        let t_minus = (k1 / k1_plus(k1)).ln();
        let t_dagger = (k1 / k1_hat(k1)).ln();
        let k5 = 4.0;
        Ok(Self {
            beta,
            k1,
            sigma,
            t_minus,
            t_dagger,
            t_plus,
            steps: 1000,
            theta: vec![0.0],
            k4: 5.0,
            k5,
            centering: (8.0 / beta).sqrt() * (t_plus - t_minus),
            zero_noise: false,
        })
    }

    /// [−2πk1, 0] ∩ (2π/4k5)ℤ, ascending.
    pub fn lattice(&self) -> Vec<f64> {
        let pitch = TAU / (4.0 * self.k5);
        let count = (TAU * self.k1 / pitch).floor() as usize;
        (0..=count).rev().map(|i| -(i as f64) * pitch).collect()
    }

    pub fn pitch(&self) -> f64 {
        TAU / (4.0 * self.k5)
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_k45(mut self, k4: f64, k5: f64) -> Self {
        self.k4 = k4;
        self.k5 = k5;
        self.theta = self.lattice();
        self
    }

    pub fn dt(&self) -> f64 {
        (self.t_plus - self.t_minus) / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_minus < self.t_dagger && self.t_dagger < self.t_plus) {
            return Err(invalid("times", "need T_- < T_dagger < T_+"));
        }
        if self.steps < 2 {
            return Err(invalid("steps", "need at least 2"));
        }
        if self.dt() > 1e-2 * (self.t_plus - self.t_minus).max(1.0) {
            return Err(invalid("dt", format!("step {} too large", self.dt())));
        }
        if self.theta.is_empty() {
            return Err(invalid("theta", "empty mesh"));
        }
        Ok(())
    }

    /// Time grid from T_− to T_+ with T_† as a node.
    pub fn grid(&self) -> Vec<f64> {
        let span = self.t_plus - self.t_minus;
        let n1 = (((self.t_dagger - self.t_minus) / span * self.steps as f64).round() as usize).clamp(1, self.steps - 1);
        let n2 = self.steps - n1;
        let mut g: Vec<f64> = (0..n1)
            .map(|i| self.t_minus + (self.t_dagger - self.t_minus) * i as f64 / n1 as f64)
            .collect();
        g.extend((0..=n2).map(|i| self.t_dagger + (self.t_plus - self.t_dagger) * i as f64 / n2 as f64));
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorationPath {
    pub variant: Variant,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    /// 𝔏 per (time, θ).
    pub l: Vec<Vec<Complex64>>,
    /// 𝔘 per (time, θ).
    pub u: Vec<Vec<f64>>,
    pub barrier_ok: Option<Vec<bool>>,
}

impl DecorationPath {
    pub fn terminal_u(&self) -> &[f64] {
        self.u.last().expect("non-empty path")
    }

    pub fn terminal_l(&self) -> &[Complex64] {
        self.l.last().expect("non-empty path")
    }
}

/// One complex increment with E|ΔW|² = 2 dt.
#[inline]
fn increment(stream: &mut RngStream, dt: f64) -> Complex64 {
    let s = dt.sqrt();
    Complex64::new(s * stream.normal(), s * stream.normal())
}

/// 𝔘 = Re(σ(𝔏 − iθk1⁻¹(e^t − 1))) − centering.
#[inline]
pub fn u_of(l: Complex64, theta: f64, t: f64, k1: f64, sigma: Sigma, centering: f64) -> f64 {
    let shifted = l - Complex64::new(0.0, theta * t.exp_m1() / k1);
    (sigma.unit() * shifted).re - centering
}

fn simulate(config: &SdeConfig, init: &[Complex64], phase: f64, variant: Variant, stream: &mut RngStream) -> Result<DecorationPath> {
    config.validate()?;
    if init.len() != config.theta.len() {
        return Err(invalid("initial_L", "length differs from the θ mesh"));
    }
    let grid = config.grid();
    let s = if config.zero_noise { 0.0 } else { (4.0 / config.beta).sqrt() };
    let rot = Complex64::cis(phase);
    let mut l = init.to_vec();
    let mut ls = Vec::with_capacity(grid.len());
    let mut us = Vec::with_capacity(grid.len());
    let record = |l: &[Complex64], t: f64| -> Vec<f64> {
        l.iter()
            .zip(&config.theta)
            .map(|(&x, &th)| u_of(x, th, t, config.k1, config.sigma, config.centering))
            .collect()
    };
    us.push(record(&l, grid[0]));
    ls.push(l.clone());
    for w in grid.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        let dw = increment(stream, dt);
        let drift_on = match variant {
            Variant::MatchedInitial => true,
            Variant::FlatInitial => t >= config.t_dagger - 1e-12,
        };
        let a = if drift_on { t.exp() * dt / config.k1 } else { 0.0 };
        for (x, &th) in l.iter_mut().zip(&config.theta) {
            *x += Complex64::new(0.0, th * a) + s * Complex64::cis(x.im) * rot * dw;
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {t}")));
        }
        us.push(record(&l, w[1]));
        ls.push(l.clone());
    }
    Ok(DecorationPath {
        variant,
        t: grid,
        theta: config.theta.clone(),
        l: ls,
        u: us,
        barrier_ok: None,
    })
}

/// Euler–Maruyama for 𝔏 with the supplied initial condition at T_−.
pub fn simulate_coupled(config: &SdeConfig, initial_l: &[Complex64], stream: &mut RngStream) -> Result<DecorationPath> {
    simulate(config, initial_l, 0.0, Variant::MatchedInitial, stream)
}

/// 𝔏^o: zero start at T_−, drift from T_†, fixed phase e^{i·phase} in the
/// diffusion coefficient.
pub fn simulate_flat(config: &SdeConfig, stream: &mut RngStream, phase: f64) -> Result<DecorationPath> {
    let init = vec![Complex64::new(0.0, 0.0); config.theta.len()];
    simulate(config, &init, phase, Variant::FlatInitial, stream)
}

/// 𝒜_t^± = (t − T_+) − (T_+ − t)^{1/2 ∓ 3/7}.
pub fn decoration_envelope(t: f64, t_plus: f64) -> (f64, f64) {
    let r = (t_plus - t).max(0.0);
    let lower = (t - t_plus) - r.powf(0.5 + 3.0 / 7.0);
    let upper = (t - t_plus) - r.powf(0.5 - 3.0 / 7.0);
    (lower, upper)
}

/// sqrt(8/β)(t − T_+ + (T_+ − t + (log k5)^50)^{1/50}).
pub fn terminal_cap(t: f64, t_plus: f64, k5: f64, beta: f64) -> f64 {
    let lk = k5.ln().powi(50);
    (8.0 / beta).sqrt() * (t - t_plus + (t_plus - t + lk).powf(0.02))
}

fn barrier_at(config: &SdeConfig, t: f64, u: f64) -> bool {
    let c = (8.0 / config.beta).sqrt();
    let split = config.t_plus - config.k4;
    if t < config.t_dagger - 1e-12 {
        return true;
    }
    if t <= split {
        let (lo, hi) = decoration_envelope(t, config.t_plus);
        if !(c * lo <= u && u <= c * hi) {
            return false;
        }
    }
    if t >= split {
        return u <= terminal_cap(t, config.t_plus, config.k5, config.beta);
    }
    true
}

/// Grid-checked ray event per θ: tube on [T_†, T_+ − k4], cap on
/// [T_+ − k4, T_+].
pub fn barrier_event(config: &SdeConfig, path: &mut DecorationPath) -> Vec<bool> {
    let mut ok = vec![true; path.theta.len()];
    for (t, row) in path.t.iter().zip(&path.u) {
        for (flag, &u) in ok.iter_mut().zip(row) {
            if *flag && !barrier_at(config, *t, u) {
                *flag = false;
            }
        }
    }
    path.barrier_ok = Some(ok.clone());
    ok
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecorationLaw {
    /// 𝔰: the law of D^o.
    S,
    /// 𝔭: D^o times an independent uniform phase for σ = 1.
    P,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorationSample {
    pub decoration: Decoration,
    /// Max of 𝔘^o_{T_+} over lattice points passing the barrier, −∞ if none.
    pub w_o: f64,
    pub barrier_pass_fraction: f64,
}

/// Samples of D^o on the lattice of `config`. With `enforce_barrier` off
/// the indicator is dropped.
pub fn sample_decoration(
    config: &SdeConfig,
    stream: &mut RngStream,
    n_samples: usize,
    law: DecorationLaw,
    enforce_barrier: bool,
) -> Result<Vec<DecorationSample>> {
    let c = (8.0 / config.beta).sqrt() * (config.t_plus - config.t_minus);
    (0..n_samples)
        .map(|_| {
            let mut path = simulate_flat(config, stream, 0.0)?;
            let ok = if enforce_barrier {
                barrier_event(config, &mut path)
            } else {
                vec![true; path.theta.len()]
            };
            let rot = match (law, config.sigma) {
                (DecorationLaw::P, Sigma::Real) => Complex64::cis(stream.angle()),
                _ => Complex64::new(1.0, 0.0),
            };
            let lt = path.terminal_l();
            let ut = path.terminal_u();
            let values: Vec<Complex64> = (0..ok.len())
                .map(|i| {
                    if !ok[i] {
                        return Complex64::new(0.0, 0.0);
                    }
                    match config.sigma {
                        Sigma::Real => (lt[i] - c).exp() * rot,
                        Sigma::Imaginary => Complex64::new(ut[i].exp(), 0.0),
                    }
                })
                .collect();
            let w_o = ut
                .iter()
                .zip(&ok)
                .filter(|(_, &f)| f)
                .map(|(&u, _)| u)
                .fold(f64::NEG_INFINITY, f64::max);
            let pass = ok.iter().filter(|&&f| f).count() as f64 / ok.len() as f64;
            Ok(DecorationSample {
                decoration: Decoration {
                    k1: config.k1,
                    pitch: config.pitch(),
                    values,
                },
                w_o,
                barrier_pass_fraction: pass,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGap {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
}

impl PhaseGap {
    pub fn min(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Δ_t = Im 𝔏_t(θ) − Im 𝔏^o_t(θ) − Im 𝔏_{T_−}(θ_j) for one θ, both
/// diffusions driven by the same increments; Im 𝔏_{T_−}(θ_j) = `phase`
/// and Im 𝔏_{T_−}(θ) = phase + initial_gap.
pub fn phase_gap_dynamics(config: &SdeConfig, stream: &mut RngStream, theta: f64, phase: f64, initial_gap: f64) -> Result<PhaseGap> {
    let cfg = config.clone().with_theta(vec![theta]);
    cfg.validate()?;
    let grid = cfg.grid();
    let s = if cfg.zero_noise { 0.0 } else { (4.0 / cfg.beta).sqrt() };
    let rot = Complex64::cis(phase);
    let mut l = Complex64::new(0.0, phase + initial_gap);
    let mut lo = Complex64::new(0.0, 0.0);
    let mut delta = Vec::with_capacity(grid.len());
    delta.push(l.im - lo.im - phase);
    for w in grid.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        let dw = increment(stream, dt);
        let a = t.exp() * dt / cfg.k1;
        let a_o = if t >= cfg.t_dagger - 1e-12 { a } else { 0.0 };
        let nl = l + Complex64::new(0.0, theta * a) + s * Complex64::cis(l.im) * dw;
        let nlo = lo + Complex64::new(0.0, theta * a_o) + s * Complex64::cis(lo.im) * rot * dw;
        l = nl;
        lo = nlo;
        delta.push(l.im - lo.im - phase);
    }
    Ok(PhaseGap { t: grid, delta })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneRayEstimate {
    pub h: f64,
    pub probability: f64,
    pub se: f64,
    pub paths: usize,
}

/// Smooth curve below the upper tube edge used to steer one-ray proposals,
/// in the unit-variance coordinate sqrt(β/4)𝔘: sqrt(2)((t − T_+) − (T_+ − t + 1)^{1/14}).
fn proposal_ceiling(t: f64, t_plus: f64) -> (f64, f64) {
    let r = t_plus - t + 1.0;
    let e = 0.5 - 3.0 / 7.0;
    let v = 2f64.sqrt() * ((t - t_plus) - r.powf(e));
    let dv = 2f64.sqrt() * (1.0 + e * r.powf(e - 1.0));
    (v, dv)
}

/// P(𝔘^o_{T_+}(0) ≥ −k7 and the ray event) for a flat start at height h
/// below the line, i.e. 𝔘^o_{T_−} = −sqrt(8/β) log k1⁺ − sqrt(4/β) h.
///
/// Paths are proposed under a change of drift that makes the unit-variance
/// coordinate Y = sqrt(β/4)𝔘 follow a Bessel-3 bridge below a curve just
/// under the tube, ending one unit beneath it; each path carries its
/// Girsanov likelihood ratio.
pub fn one_ray_probability(config: &SdeConfig, h: f64, k7: f64, paths: usize, stream: &mut RngStream) -> Result<OneRayEstimate> {
    let cfg = config.clone().with_theta(vec![0.0]);
    cfg.validate()?;
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    let grid = cfg.grid();
    let s = (4.0 / cfg.beta).sqrt();
    let r = (cfg.beta / 4.0).sqrt();
    let sig = cfg.sigma.unit();
    let c1 = 1.0;
    let mut weights = Vec::with_capacity(paths);
    for _ in 0..paths {
        let d = s * h;
        let mut l = match cfg.sigma {
            Sigma::Real => Complex64::new(-d, 0.0),
            Sigma::Imaginary => Complex64::new(0.0, d),
        };
        let mut u = u_of(l, 0.0, grid[0], cfg.k1, cfg.sigma, cfg.centering);
        let mut log_w = 0.0;
        let mut ok = true;
        for w in grid.windows(2) {
            let (t, dt) = (w[0], w[1] - w[0]);
            let tau = cfg.t_plus - t;
            let (ceil, dceil) = proposal_ceiling(t, cfg.t_plus);
            let gap = (ceil - r * u).max(0.05);
            let z = gap * c1 / tau;
            let coth = if z > 20.0 { 1.0 } else { 1.0 / z.tanh() };
            let mu = dceil - (c1 / tau * coth - gap / tau);
            // under Q, dW = dW_q + a dt with Re(σ e^{i Im 𝔏} a) = mu
            let a = mu * sig.conj() * Complex64::cis(-l.im);
            let dw_q = increment(stream, dt);
            let dw = dw_q + a * dt;
            log_w += -(a.re * dw_q.re + a.im * dw_q.im) - 0.5 * a.norm_sqr() * dt;
            l += s * Complex64::cis(l.im) * dw;
            u = u_of(l, 0.0, w[1], cfg.k1, cfg.sigma, cfg.centering);
            if !barrier_at(&cfg, w[1], u) {
                ok = false;
                break;
            }
        }
        weights.push(if ok && u >= -k7 { log_w.exp() } else { 0.0 });
    }
    let p = crate::stats::mean(&weights);
    let se = crate::stats::std_err(&weights);
    Ok(OneRayEstimate {
        h,
        probability: p,
        se,
        paths,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneRayFit {
    pub points: Vec<OneRayEstimate>,
    /// Slope of log(P/h) + h²/(2(T_+ − T_−)) against h.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// One-ray probabilities over `hs` and the regression of
/// log(P/h) + h²/(2(T_+ − T_−)) on h.
pub fn one_ray_fit(config: &SdeConfig, hs: &[f64], k7: f64, paths: usize, stream: &mut RngStream) -> Result<OneRayFit> {
    let span = config.t_plus - config.t_minus;
    let mut pts = vec![];
    for &h in hs {
        pts.push(one_ray_probability(config, h, k7, paths, stream)?);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .filter(|p| p.probability > 0.0)
        .map(|p| (p.h, (p.probability / p.h).ln() + p.h * p.h / (2.0 * span)))
        .unzip();
    if x.len() < 3 {
        return Err(Error::Numerical("fewer than three positive one-ray estimates".into()));
    }
    let (a, b, r2) = crate::stats::linear_fit(&x, &y);
    Ok(OneRayFit {
        points: pts,
        slope: b,
        intercept: a,
        r2,
    })
}

/// Binary path dump: magic "CBED", version, beta, k1, sigma, t_len,
/// theta_len, then the time grid, θ mesh, Re 𝔏, Im 𝔏 and 𝔘 row-major
/// (time × θ), all little-endian.
pub fn write_path_binary<W: Write>(mut w: W, config: &SdeConfig, path: &DecorationPath) -> Result<()> {
    w.write_all(b"CBED")?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&config.beta.to_le_bytes())?;
    w.write_all(&config.k1.to_le_bytes())?;
    let sig: u64 = match config.sigma {
        Sigma::Real => 0,
        Sigma::Imaginary => 1,
    };
    w.write_all(&sig.to_le_bytes())?;
    w.write_all(&(path.t.len() as u64).to_le_bytes())?;
    w.write_all(&(path.theta.len() as u64).to_le_bytes())?;
    for x in path.t.iter().chain(&path.theta) {
        w.write_all(&x.to_le_bytes())?;
    }
    for row in &path.l {
        for z in row {
            w.write_all(&z.re.to_le_bytes())?;
        }
    }
    for row in &path.l {
        for z in row {
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    for row in &path.u {
        for x in row {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}
