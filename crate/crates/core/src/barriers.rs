//! Barrier and envelope functions, Bessel-3 bridge densities and samplers,
//! and Brownian-bridge positivity probabilities.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::special::{integrate, integrate_to_inf, log_sinh, EULER_GAMMA};

const HARMONIC_EXACT_MAX: u64 = 1_000_000;

/// H_k = Σ_{j ≤ k} 1/j; summed up to 10⁶, asymptotic beyond.
pub fn harmonic(k: u64) -> f64 {
    if k <= HARMONIC_EXACT_MAX {
        // backwards for accuracy
        (1..=k).rev().map(|j| 1.0 / j as f64).sum()
    } else {
        let x = k as f64;
        x.ln() + EULER_GAMMA + 0.5 / x - 1.0 / (12.0 * x * x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    /// A_k^≪, argument k ∈ [0, n].
    UpperAll,
    /// A_t^{p,±}, argument t ∈ [0, log n].
    Banana { p: u32, side: Side },
    /// u_k^{(N)} (upper) or l_k^{(N)} (lower), argument k ∈ [0, N].
    Envelope { side: Side },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub n: u64,
    pub kind: BarrierKind,
}

impl BarrierSpec {
    pub fn new(n: u64, kind: BarrierKind) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "must be at least 2"));
        }
        if let BarrierKind::Banana { p: 0, .. } = kind {
            return Err(invalid("p", "must be at least 1"));
        }
        Ok(Self { n, kind })
    }

    /// Upper end of the argument domain.
    pub fn domain_end(&self) -> f64 {
        match self.kind {
            BarrierKind::Banana { .. } => (self.n as f64).ln(),
            _ => self.n as f64,
        }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let end = self.domain_end();
        if !(x >= 0.0 && x <= end) {
            return Err(invalid("argument", format!("{x} outside [0, {end}]")));
        }
        let n = self.n as f64;
        let log_n = n.ln();
        Ok(match self.kind {
            BarrierKind::UpperAll => {
                if x.fract() != 0.0 {
                    return Err(invalid("k", "must be an integer"));
                }
                let hk = harmonic(x as u64);
                if hk <= 0.5 * log_n {
                    hk + hk.powf(0.01)
                } else {
                    let hn = harmonic(self.n);
                    hk + (hn - hk).max(0.0).powf(0.01) - 0.75 * log_n
                }
            }
            BarrierKind::Banana { p, side } => {
                let e = banana_exponent(p, side);
                if x <= 0.5 * log_n {
                    x - x.powf(e)
                } else {
                    x - (log_n - x).powf(e) - 0.75 * log_n.ln()
                }
            }
            BarrierKind::Envelope { side } => {
                if x.fract() != 0.0 {
                    return Err(invalid("k", "must be an integer"));
                }
                let a = match side {
                    Side::Upper => 0.1,
                    Side::Lower => 0.9,
                };
                if x <= (self.n / 2) as f64 {
                    -x.powf(a)
                } else {
                    -(n - x).powf(a) - 0.75 * log_n
                }
            }
        })
    }
}

/// 1/2 ∓ p/(2p + 1) for the upper (−) and lower (+) banana barrier.
pub fn banana_exponent(p: u32, side: Side) -> f64 {
    let q = p as f64 / (2.0 * p as f64 + 1.0);
    match side {
        Side::Upper => 0.5 - q,
        Side::Lower => 0.5 + q,
    }
}

/// Conditioned bridge below the line t ↦ αt from αt0 − c0 to αt1 − c1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselBridgeSpec {
    pub t0: f64,
    pub t1: f64,
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
}

impl BesselBridgeSpec {
    pub fn new(t0: f64, t1: f64, c0: f64, c1: f64, alpha: f64) -> Result<Self> {
        if !(t0 < t1) {
            return Err(invalid("t0", "need t0 < t1"));
        }
        if !(c0 > 0.0 && c1 > 0.0) {
            return Err(invalid("c", "endpoint distances must be positive"));
        }
        Ok(Self { t0, t1, c0, c1, alpha })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t > self.t0 && t < self.t1) {
            return Err(invalid("t", format!("{t} outside ({}, {})", self.t0, self.t1)));
        }
        Ok(())
    }

    /// log Z(t1 − t0, c0, c1) at time t.
    pub fn log_normalizer(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (a, b, l) = (t - self.t0, self.t1 - t, self.t1 - self.t0);
        let (c0, c1) = (self.c0, self.c1);
        Ok(0.5 * (2.0 / PI).ln() + 0.5 * (l / (a * b)).ln() - c0 * c0 / (2.0 * a) + c0 * c0 / (2.0 * l) - c1 * c1 / (2.0 * b)
            + c1 * c1 / (2.0 * l)
            - log_sinh(c0 * c1 / l))
    }

    /// log f(u), u > 0. The exponentials of the sinh factors and the
    /// normalizer combine into one Gaussian in u centred at
    /// (c0 b + c1 a)/l with variance ab/l, leaving only the factors
    /// 1 − e^{−2x}, so nothing large cancels.
    pub fn log_density(&self, t: f64, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(invalid("u", "must be nonnegative"));
        }
        self.check_time(t)?;
        if u == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let (a, b, l) = (t - self.t0, self.t1 - t, self.t1 - self.t0);
        let var = a * b / l;
        let mode = (self.c0 * b + self.c1 * a) / l;
        let one_minus = |x: f64| (-(-2.0 * x).exp_m1()).ln();
        Ok(-0.5 * (2.0 * PI * var).ln() - (u - mode).powi(2) / (2.0 * var) + one_minus(self.c0 * u / a) + one_minus(self.c1 * u / b)
            - one_minus(self.c0 * self.c1 / l))
    }

    /// Density of y_t = αt − 𝔛_t.
    pub fn density(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.log_density(t, u)?.exp())
    }

    /// Window holding the bulk of y_t: the Gaussian mode (c0 b + c1 a)/l
    /// plus and minus 15 standard deviations sqrt(ab/l).
    fn bulk(&self, t: f64) -> (f64, f64) {
        let (a, b, l) = (t - self.t0, self.t1 - t, self.t1 - self.t0);
        let mode = (self.c0 * b + self.c1 * a) / l;
        let sd = (a * b / l).sqrt();
        ((mode - 15.0 * sd).max(0.0), mode + 15.0 * sd)
    }

    /// ∫ f over [lo, hi] with the bulk window cut into panels so the
    /// adaptive rule cannot step over a narrow peak.
    fn mass_between(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let f = |u: f64| self.density(t, u).unwrap_or(0.0);
        let (b0, b1) = self.bulk(t);
        let mut cuts = vec![lo];
        for i in 0..=30 {
            let c = b0 + (b1 - b0) * i as f64 / 30.0;
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.push(hi);
        cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-14).0).sum()
    }

    /// P(y_t ≤ x) by quadrature.
    pub fn cdf(&self, t: f64, x: f64) -> Result<f64> {
        self.check_time(t)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.mass_between(t, 0.0, x).min(1.0))
    }

    /// ∫₀^∞ f(u) du.
    pub fn total_mass(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (_, b1) = self.bulk(t);
        let f = |u: f64| self.density(t, u).unwrap_or(0.0);
        let (tail, _) = integrate_to_inf(f, b1, 1e-13);
        Ok(self.mass_between(t, 0.0, b1) + tail)
    }

    /// Drift of y at (s, y): (c1/τ) coth(y c1/τ) − y/τ, τ = t1 − s.
    pub fn drift(&self, s: f64, y: f64) -> f64 {
        let tau = self.t1 - s;
        let z = y * self.c1 / tau;
        let coth = if z < 1e-8 {
            1.0 / z + z / 3.0
        } else if z > 20.0 {
            1.0
        } else {
            1.0 / z.tanh()
        };
        self.c1 / tau * coth - y / tau
    }
}

/// Uniform grid of `steps` intervals on [t0, t1].
pub fn uniform_grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect()
}

/// y_t = αt − 𝔛_t on `t_grid` (which must run from t0 to t1) by
/// Euler–Maruyama on the Doob-transform drift, reflected at 0 and pinned to
/// c1 on the last step.
pub fn sample_bessel_bridge(spec: &BesselBridgeSpec, stream: &mut RngStream, t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.len() < 2 || t_grid[0] != spec.t0 || *t_grid.last().unwrap() != spec.t1 {
        return Err(invalid("t_grid", "must run from t0 to t1"));
    }
    let max_dt = t_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_dt > 1e-3 * (spec.t1 - spec.t0) * (1.0 + 1e-9) {
        return Err(invalid("t_grid", "step exceeds 1e-3 (t1 - t0)"));
    }
    let mut y = spec.c0;
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y);
    let last = t_grid.len() - 2;
    for (i, w) in t_grid.windows(2).enumerate() {
        let (s, dt) = (w[0], w[1] - w[0]);
        if i == last {
            y = spec.c1;
        } else {
            y = (y + spec.drift(s, y) * dt + dt.sqrt() * stream.normal()).abs();
        }
        out.push(y);
    }
    Ok(out)
}

/// sup_t |y_t − chord_t| for a path on [t0, t1].
pub fn sup_deviation_from_chord(path: &[f64]) -> f64 {
    let n = path.len() - 1;
    let (a, b) = (path[0], path[n]);
    path.iter()
        .enumerate()
        .map(|(i, &y)| (y - (a + (b - a) * i as f64 / n as f64)).abs())
        .fold(0.0, f64::max)
}

/// P(Brownian bridge from x0 to x1 over time t stays positive) =
/// 1 − exp(−2 x0 x1 / t).
pub fn bridge_positive_prob(x0: f64, x1: f64, t: f64) -> Result<f64> {
    if x0 < 0.0 || x1 < 0.0 {
        return Err(invalid("x", "endpoints must be nonnegative"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    Ok(-(-2.0 * x0 * x1 / t).exp_m1())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityEstimate {
    /// Richardson-extrapolated frequency 2 p_fine − p_coarse.
    pub estimate: f64,
    pub se: f64,
    pub fine: f64,
    pub coarse: f64,
    pub paths: usize,
}

/// Monte Carlo positivity frequency of a discretely monitored Brownian
/// bridge. The path is built on `4 · coarse_steps` intervals and monitored
/// on the fine grid and on every fourth node; the monitoring bias is of
/// order sqrt(dt), so 2 p_fine − p_coarse removes its leading term.
pub fn bridge_positive_mc(x0: f64, x1: f64, t: f64, coarse_steps: usize, paths: usize, stream: &mut RngStream) -> Result<PositivityEstimate> {
    bridge_positive_prob(x0, x1, t)?;
    let m = 4 * coarse_steps;
    let dt = t / m as f64;
    let mut vals = Vec::with_capacity(paths);
    let (mut nf, mut nc) = (0usize, 0usize);
    for _ in 0..paths {
        // Brownian bridge by sequential conditioning
        let mut x = x0;
        let mut fine_ok = x0 > 0.0;
        let mut coarse_ok = fine_ok;
        for i in 1..m {
            let rem = t - (i - 1) as f64 * dt;
            let mean = x + (x1 - x) * dt / rem;
            let var = dt * (rem - dt) / rem;
            x = mean + var.sqrt() * stream.normal();
            if x <= 0.0 {
                fine_ok = false;
                if i % 4 == 0 {
                    coarse_ok = false;
                }
                if !coarse_ok {
                    break;
                }
            }
        }
        fine_ok &= x1 > 0.0;
        coarse_ok &= x1 > 0.0;
        nf += fine_ok as usize;
        nc += coarse_ok as usize;
        vals.push(2.0 * fine_ok as u8 as f64 - coarse_ok as u8 as f64);
    }
    Ok(PositivityEstimate {
        estimate: crate::stats::mean(&vals),
        se: crate::stats::std_err(&vals),
        fine: nf as f64 / paths as f64,
        coarse: nc as f64 / paths as f64,
        paths,
    })
}
