//! Reference limit laws, samplers and goodness-of-fit statistics.
//!
//! The FHK density is `4 e^{-2x} K₀(2e^{-x})`, the law of `(G₁ + G₂)/2` for
//! independent standard Gumbels. Its CDF is tabulated once by adaptive
//! quadrature of the density and interpolated with cubic Hermite splines.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::special::{bessel_k0_scaled, integrate};
use crate::stats;

/// Minimum sample size accepted by [`gof`].
pub const GOF_MIN_SAMPLES: usize = 100;

pub fn fhk_density(x: f64) -> f64 {
    if !(-700.0..=700.0).contains(&x) {
        return 0.0;
    }
    let z = 2.0 * (-x).exp();
    let log_d = 4f64.ln() - 2.0 * x + bessel_k0_scaled(z).ln() - z;
    log_d.exp()
}

pub fn gumbel_density(x: f64, scale: f64) -> f64 {
    let y = x / scale;
    (-y - (-y).exp()).exp() / scale
}

pub fn gumbel_cdf(x: f64, scale: f64) -> f64 {
    (-(-x / scale).exp()).exp()
}

/// Density of `G₁ + G₂` for independent standard Gumbels.
pub fn two_gumbel_sum_density(x: f64) -> f64 {
    0.5 * fhk_density(0.5 * x)
}

/// CDF tabulated on a uniform grid with values and derivatives at the nodes.
#[derive(Clone, Debug)]
struct HermiteTable {
    x0: f64,
    h: f64,
    f: Vec<f64>,
    df: Vec<f64>,
}

impl HermiteTable {
    fn eval(&self, x: f64) -> f64 {
        let last = self.f.len() - 1;
        let u = (x - self.x0) / self.h;
        if u <= 0.0 {
            return self.f[0];
        }
        if u >= last as f64 {
            return self.f[last];
        }
        let i = (u.floor() as usize).min(last - 1);
        let t = u - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[i] + h10 * self.h * self.df[i] + h01 * self.f[i + 1] + h11 * self.h * self.df[i + 1]
    }
}

const FHK_LO: f64 = -6.0;
const FHK_HI: f64 = 30.0;
const FHK_STEP: f64 = 1.0 / 256.0;

fn fhk_table() -> &'static HermiteTable {
    static TABLE: OnceLock<HermiteTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cells = ((FHK_HI - FHK_LO) / FHK_STEP).round() as usize;
        // mass left of −6 is below e^{-800}
        let mut f = Vec::with_capacity(cells + 1);
        let mut df = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        f.push(0.0);
        df.push(fhk_density(FHK_LO));
        for i in 0..cells {
            let a = FHK_LO + i as f64 * FHK_STEP;
            let (v, _) = integrate(fhk_density, a, a + FHK_STEP, 1e-15);
            acc += v;
            f.push(acc);
            df.push(fhk_density(a + FHK_STEP));
        }
        HermiteTable {
            x0: FHK_LO,
            h: FHK_STEP,
            f,
            df,
        }
    })
}

/// FHK CDF from the quadrature table (exact 0/1 outside [−6, 30] up to
/// below 1e-24).
pub fn fhk_cdf(x: f64) -> f64 {
    fhk_table().eval(x)
}

pub fn two_gumbel_sum_cdf(x: f64) -> f64 {
    fhk_cdf(0.5 * x)
}

pub fn sample_gumbel(scale: f64, stream: &mut RngStream) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    Ok(-scale * (-stream.uniform_open().ln()).ln())
}

fn gumbel_unit(stream: &mut RngStream) -> f64 {
    -(-stream.uniform_open().ln()).ln()
}

/// `G₁ + G₂` for independent standard Gumbels.
pub fn sample_two_gumbel_sum(stream: &mut RngStream) -> f64 {
    gumbel_unit(stream) + gumbel_unit(stream)
}

/// A draw from the FHK law, `(G₁ + G₂)/2`.
pub fn sample_fhk(stream: &mut RngStream) -> f64 {
    0.5 * sample_two_gumbel_sum(stream)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    Fhk,
    Gumbel { scale: f64 },
    TwoGumbelSum,
    /// Gumbel of the given scale convolved with the empirical law of `shifts`.
    ShiftedGumbel { scale: f64, shifts: Vec<f64> },
}

impl LimitLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            LimitLaw::Gumbel { scale } | LimitLaw::ShiftedGumbel { scale, .. } if !(*scale > 0.0 && scale.is_finite()) => {
                Err(invalid("scale", format!("must be positive, got {scale}")))
            }
            LimitLaw::ShiftedGumbel { shifts, .. } if shifts.is_empty() || shifts.iter().any(|s| !s.is_finite()) => {
                Err(invalid("shifts", "need a nonempty finite shift sample"))
            }
            _ => Ok(()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Fhk => fhk_density(x),
            LimitLaw::Gumbel { scale } => gumbel_density(x, *scale),
            LimitLaw::TwoGumbelSum => two_gumbel_sum_density(x),
            LimitLaw::ShiftedGumbel { scale, shifts } => {
                shifts.iter().map(|s| gumbel_density(x - s, *scale)).sum::<f64>() / shifts.len() as f64
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Fhk => fhk_cdf(x),
            LimitLaw::Gumbel { scale } => gumbel_cdf(x, *scale),
            LimitLaw::TwoGumbelSum => two_gumbel_sum_cdf(x),
            LimitLaw::ShiftedGumbel { scale, shifts } => {
                shifts.iter().map(|s| gumbel_cdf(x - s, *scale)).sum::<f64>() / shifts.len() as f64
            }
        }
    }

    /// Assumes the law is valid.
    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        match self {
            LimitLaw::Fhk => sample_fhk(stream),
            LimitLaw::Gumbel { scale } => scale * gumbel_unit(stream),
            LimitLaw::TwoGumbelSum => sample_two_gumbel_sum(stream),
            LimitLaw::ShiftedGumbel { scale, shifts } => {
                let i = ((stream.uniform() * shifts.len() as f64) as usize).min(shifts.len() - 1);
                shifts[i] + scale * gumbel_unit(stream)
            }
        }
    }

    /// An interval carrying all but a negligible amount of mass.
    pub fn support_window(&self) -> (f64, f64) {
        match self {
            LimitLaw::Fhk => (-6.0, 30.0),
            LimitLaw::Gumbel { scale } => (-4.0 * scale, 40.0 * scale),
            LimitLaw::TwoGumbelSum => (-12.0, 60.0),
            LimitLaw::ShiftedGumbel { scale, shifts } => {
                let lo = shifts.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo - 4.0 * scale, hi + 40.0 * scale)
            }
        }
    }
}

/// Maximum-likelihood location of a Gumbel with known scale:
/// `μ = −scale · log mean e^{−x/scale}`.
pub fn fit_gumbel_location(samples: &[f64], scale: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("samples", "empty sample"));
    }
    if !(scale > 0.0) {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    // log-sum-exp for stability
    let m = samples.iter().map(|x| -x / scale).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = samples.iter().map(|x| (-x / scale - m).exp()).sum();
    Ok(-scale * (m + (s / samples.len() as f64).ln()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gof {
    pub n: usize,
    pub ks: f64,
    pub anderson_darling: f64,
    /// Asymptotic Kolmogorov p-value.
    pub ks_pvalue_asymptotic: f64,
    /// Parametric-bootstrap p-value of the KS statistic.
    pub ks_pvalue: f64,
    pub resamples: usize,
}

/// KS and Anderson–Darling statistics of `samples` against `law`, with a
/// parametric-bootstrap p-value from `resamples` synthetic samples of the
/// same size drawn from `law`.
pub fn gof(samples: &[f64], law: &LimitLaw, resamples: usize, stream: &mut RngStream) -> Result<Gof> {
    law.validate()?;
    if samples.len() < GOF_MIN_SAMPLES {
        return Err(invalid(
            "samples",
            format!("need at least {GOF_MIN_SAMPLES}, got {}", samples.len()),
        ));
    }
    let n = samples.len();
    let cdf = |x: f64| law.cdf(x);
    let ks = stats::ks_statistic(samples, cdf);
    let ad = stats::anderson_darling(samples, cdf);
    let mut exceed = 0usize;
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for v in buf.iter_mut() {
            *v = law.sample(stream);
        }
        if stats::ks_statistic(&buf, cdf) >= ks {
            exceed += 1;
        }
    }
    Ok(Gof {
        n,
        ks,
        anderson_darling: ad,
        ks_pvalue_asymptotic: stats::ks_pvalue(ks, n),
        ks_pvalue: (1 + exceed) as f64 / (1 + resamples) as f64,
        resamples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub x: f64,
    pub fhk: f64,
    pub gumbel: f64,
    pub two_sum: f64,
}

pub fn density_table(lo: f64, hi: f64, points: usize) -> Result<Vec<DensityRow>> {
    if points < 2 || !(hi > lo) {
        return Err(invalid("points", "need at least two points on a nonempty range"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let x = lo + i as f64 * step;
            DensityRow {
                x,
                fhk: fhk_density(x),
                gumbel: gumbel_density(x, 1.0),
                two_sum: two_gumbel_sum_density(x),
            }
        })
        .collect())
}

/// CSV with header `x,fhk,gumbel,two_sum`.
pub fn write_density_csv<W: Write>(rows: &[DensityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fhk_mass_and_positivity() {
        let (v, _) = integrate(fhk_density, -10.0, 40.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        for i in 0..200 {
            let x = -5.0 + 0.1 * i as f64;
            assert!(fhk_density(x) > 0.0);
        }
        assert_eq!(fhk_density(1e4), 0.0);
    }

    #[test]
    fn tabulated_cdf_matches_quadrature() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.0, 4.0] {
            let (v, _) = integrate(fhk_density, -8.0, x, 1e-12);
            assert!((fhk_cdf(x) - v).abs() < 1e-11, "x={x}");
        }
        assert_eq!(fhk_cdf(-50.0), 0.0);
        assert!((fhk_cdf(100.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_linearity() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 0);
        for _ in 0..100 {
            let x = sample_gumbel(1.0, &mut a).unwrap();
            let y = sample_gumbel(2.0, &mut b).unwrap();
            assert!((2.0 * x - y).abs() < 1e-12);
        }
        assert!(sample_gumbel(0.0, &mut a).is_err());
    }

    #[test]
    fn location_fit_recovers_shift() {
        let mut s = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..20000).map(|_| 1.5 + 0.5 * gumbel_unit(&mut s)).collect();
        let mu = fit_gumbel_location(&xs, 0.5).unwrap();
        assert!((mu - 1.5).abs() < 0.02, "{mu}");
    }

    #[test]
    fn gof_rejects_small_samples() {
        let mut s = RngStream::new(3, 0);
        assert!(gof(&[0.0; 10], &LimitLaw::Fhk, 10, &mut s).is_err());
    }

    #[test]
    fn density_csv_header() {
        let rows = density_table(-1.0, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,fhk,gumbel,two_sum\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gumbel_mixtures_integrate_to_one(scale in 0.1f64..5.0, shifts in proptest::collection::vec(-3.0f64..3.0, 1..5)) {
            for law in [LimitLaw::Gumbel { scale }, LimitLaw::ShiftedGumbel { scale, shifts: shifts.clone() }] {
                let (lo, hi) = law.support_window();
                let (v, _) = integrate(|x| law.pdf(x), lo, hi, 1e-13);
                prop_assert!((v - 1.0).abs() < 1e-8, "{:?} {}", law, v);
            }
        }

        #[test]
        fn samplers_reproducible(seed in any::<u64>(), id in any::<u64>()) {
            let law = LimitLaw::ShiftedGumbel { scale: 0.5, shifts: vec![0.0, 1.0] };
            let mut a = RngStream::new(seed, id);
            let mut b = RngStream::new(seed, id);
            for _ in 0..8 {
                prop_assert_eq!(law.sample(&mut a).to_bits(), law.sample(&mut b).to_bits());
                prop_assert_eq!(sample_fhk(&mut a).to_bits(), sample_fhk(&mut b).to_bits());
            }
        }

        #[test]
        fn cdfs_monotone(x in -5.0f64..20.0, d in 0.0f64..1.0) {
            for law in [LimitLaw::Fhk, LimitLaw::TwoGumbelSum, LimitLaw::Gumbel { scale: 1.0 }] {
                prop_assert!(law.cdf(x + d) >= law.cdf(x) - 1e-15);
            }
        }
    }
}
