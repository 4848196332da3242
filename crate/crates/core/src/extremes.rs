//! Centered maxima, arcs, decorations and extremal configurations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};
use crate::opuc::{argmax_first, FieldTrajectory, Sigma};
use crate::point_process::{MarkedPoint, PointConfiguration};

/// m_n = log n − (3/4) log log n.
pub fn m_n(n: f64) -> f64 {
    n.ln() - 0.75 * n.ln().ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    /// max φ_n, scale sqrt(8/β)
    Field,
    /// max log|X_n|, scale sqrt(2/β)
    LogModulus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub n: usize,
    pub m_n: f64,
    pub scale: f64,
}

impl Centering {
    /// scale · m_n
    pub fn shift(&self) -> f64 {
        self.scale * self.m_n
    }
}

pub fn centering(n: usize, beta: f64, statistic: Statistic) -> Result<Centering> {
    if n < 3 {
        return Err(invalid("n", format!("centering needs n >= 3, got {n}")));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    let scale = match statistic {
        Statistic::Field => (8.0 / beta).sqrt(),
        Statistic::LogModulus => (2.0 / beta).sqrt(),
    };
    Ok(Centering {
        n,
        m_n: m_n(n as f64),
        scale,
    })
}

/// k1⁺ = k1 exp((log k1)^{29/30}).
pub fn k1_plus(k1: f64) -> f64 {
    k1 * k1.ln().max(0.0).powf(29.0 / 30.0).exp()
}

/// k̂1 = k1 exp((log k1)^{19/20}).
pub fn k1_hat(k1: f64) -> f64 {
    k1 * k1.ln().max(0.0).powf(19.0 / 20.0).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcDecomposition {
    pub n: usize,
    pub k1: usize,
    /// [start, end) of each arc.
    pub arcs: Vec<(f64, f64)>,
    /// Supremum of each arc, reduced to [0, 2π).
    pub theta_j: Vec<f64>,
}

impl ArcDecomposition {
    pub fn count(&self) -> usize {
        self.arcs.len()
    }

    /// 1-based arc index of an angle in [0, 2π).
    pub fn arc_of(&self, theta: f64) -> usize {
        let j = (theta * self.n as f64 / (TAU * self.k1 as f64)).floor() as usize + 1;
        j.min(self.count())
    }
}

/// Arcs Î_j = 2π[(j−1)k1/n, jk1/n) ∩ [0, 2π), j = 1..⌈n/k1⌉.
pub fn arc_decomposition(n: usize, k1: usize) -> Result<ArcDecomposition> {
    if k1 == 0 || k1 > n {
        return Err(invalid("k1", format!("need 1 <= k1 <= n, got k1={k1}, n={n}")));
    }
    let count = n.div_ceil(k1);
    let nf = n as f64;
    let mut arcs = Vec::with_capacity(count);
    let mut theta_j = Vec::with_capacity(count);
    for j in 1..=count {
        let lo = TAU * ((j - 1) * k1) as f64 / nf;
        let hi = TAU * ((j * k1).min(n)) as f64 / nf;
        arcs.push((lo, hi));
        theta_j.push(hi.rem_euclid(TAU));
    }
    Ok(ArcDecomposition {
        n,
        k1,
        arcs,
        theta_j,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalMax {
    pub theta_star: f64,
    /// Mesh maximum of φ.
    pub value: f64,
    /// Certified upper bound for the maximum of φ over the circle.
    pub upper: f64,
}

/// Mesh argmax of φ with the certified bracket
/// max φ ≤ mesh max + log(m/(m−1)), valid for σ = 1 when the mesh contains
/// all 2mk-th roots of unity (k the current step).
pub fn global_max(traj: &FieldTrajectory, m: usize) -> Result<GlobalMax> {
    if traj.sigma != Sigma::Real {
        return Err(Error::MeshIncompatible("certified bracket needs sigma = 1".into()));
    }
    if m < 2 {
        return Err(invalid("m", "must be at least 2"));
    }
    let count = traj.len();
    let need = 2 * m * traj.k.max(1);
    let uniform = traj.theta.first() == Some(&0.0)
        && traj
            .theta
            .iter()
            .enumerate()
            .all(|(i, t)| (t - TAU * i as f64 / count as f64).abs() < 1e-9);
    if !uniform || count % need != 0 {
        return Err(Error::MeshIncompatible(format!(
            "mesh of {count} points does not contain the {need}-th roots of unity"
        )));
    }
    let i = traj.argmax_phi();
    let value = traj.phi[i];
    Ok(GlobalMax {
        theta_star: traj.theta[i],
        value,
        upper: value + (m as f64 / (m as f64 - 1.0)).ln(),
    })
}

/// A decoration sampled on [−2πk1, 0] at a fixed pitch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoration {
    pub k1: f64,
    pub pitch: f64,
    pub values: Vec<Complex64>,
}

impl Decoration {
    pub fn start(&self) -> f64 {
        -TAU * self.k1
    }

    /// Piecewise-linear interpolation, θ ∈ [−2πk1, 0].
    pub fn eval(&self, theta: f64) -> Complex64 {
        let x = ((theta - self.start()) / self.pitch).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.values.len().saturating_sub(2));
        let f = x - i as f64;
        if self.values.len() == 1 {
            return self.values[0];
        }
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalExtremum {
    pub j: usize,
    pub theta_j: f64,
    pub w_hat: f64,
    pub decoration: Decoration,
}

/// Mesh points per 2π/n for a uniform mesh starting at zero.
fn points_per_step(traj: &FieldTrajectory) -> Result<usize> {
    let count = traj.len();
    let n = traj.n;
    let ok = n > 0
        && count % n == 0
        && traj.theta.first() == Some(&0.0)
        && (traj.theta.len() < 2 || (traj.theta[1] - TAU / count as f64).abs() < 1e-12);
    if !ok {
        return Err(Error::WindowOutOfRange {
            lo: -TAU,
            hi: 0.0,
        });
    }
    Ok(count / n)
}

/// One marked point (θ_j, Ŵ_j, D_j) per arc, from a trajectory at step n.
pub fn extract_extremal_process(traj: &FieldTrajectory, arcs: &ArcDecomposition, centering: &Centering) -> Result<Vec<LocalExtremum>> {
    let p = points_per_step(traj)?;
    let count = traj.len();
    let k1 = arcs.k1;
    let n = traj.n;
    let shift = (8.0 / traj.beta).sqrt() * centering.m_n;
    let win = p * k1;
    let mut out = Vec::with_capacity(arcs.count());
    for (jm1, &theta_j) in arcs.theta_j.iter().enumerate() {
        let j = jm1 + 1;
        let lo = jm1 * k1 * p;
        let hi = ((j * k1).min(n) * p).min(count);
        let w_hat = traj.phi[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - shift;
        let end = (j * k1).min(n) * p;
        let phase = Complex64::new(0.0, -(n as f64 + 1.0) * theta_j);
        let values = (0..=win)
            .map(|i| {
                let idx = (end - win + i) % count;
                match traj.sigma {
                    Sigma::Real => (traj.logphi_star[idx] + phase - shift).exp(),
                    Sigma::Imaginary => Complex64::new((traj.phi[idx] - shift).exp(), 0.0),
                }
            })
            .collect();
        out.push(LocalExtremum {
            j,
            theta_j,
            w_hat,
            decoration: Decoration {
                k1: k1 as f64,
                pitch: TAU / p as f64,
                values,
            },
        });
    }
    Ok(out)
}

/// The extremal process as a point configuration (θ_j, Ŵ_j, D_j).
pub fn extremal_configuration(extrema: &[LocalExtremum]) -> PointConfiguration {
    PointConfiguration::new(
        extrema
            .iter()
            .map(|e| MarkedPoint::new(e.theta_j, e.w_hat, e.decoration.values.clone()))
            .collect(),
    )
}

/// F(θ) = 2 Im log X_n(e^{iθ}) on the branch continued from X_n(0) = 1,
/// from a trajectory sitting at step n − 1.
pub fn imaginary_field(traj: &FieldTrajectory, alpha: Complex64) -> Vec<f64> {
    traj.log_char_poly(alpha).into_iter().map(|l| 2.0 * l.im).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImaginaryExtremes {
    pub i_plus: f64,
    pub i_minus: f64,
    pub argmax: f64,
    pub argmin: f64,
}

/// Centered maximum and minimum of the imaginary field over the mesh.
pub fn imaginary_extremes(traj: &FieldTrajectory, alpha: Complex64) -> Result<ImaginaryExtremes> {
    let n = traj.k + 1;
    let c = centering(n, traj.beta, Statistic::Field)?.shift();
    let f = imaginary_field(traj, alpha);
    let imax = argmax_first(&f);
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    let imin = argmax_first(&neg);
    Ok(ImaginaryExtremes {
        i_plus: f[imax] - c,
        i_minus: f[imin] + c,
        argmax: traj.theta[imax],
        argmin: traj.theta[imin],
    })
}

/// max over circular arcs (θ1, θ2] with mesh endpoints of
/// N(θ2) − N(θ1) − n·len, from mesh values of the counting function.
pub fn max_arc_deviation(theta: &[f64], counting: &[f64], n: usize) -> f64 {
    // g(θ) = N(θ) − nθ; arcs may wrap, which adds 2πn − 2πn = 0
    let g: Vec<f64> = theta.iter().zip(counting).map(|(t, c)| c - n as f64 * t).collect();
    let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    gmax - gmin
}

/// V_j = √2 m_{n1⁺} − sqrt(β/4) φ_{n1⁺}(θ_j), with n1⁺ = ⌊n/k1⁺⌋, from the
/// snapshot stored at step n1⁺.
pub fn v_statistic(traj: &FieldTrajectory, arcs: &ArcDecomposition, k1_plus: f64) -> Result<Vec<f64>> {
    let n1p = (traj.n as f64 / k1_plus).floor() as usize;
    let snap = traj.snapshot(n1p)?;
    let mn = m_n(n1p as f64);
    let p = points_per_step(traj)?;
    let count = traj.len();
    let half = (traj.beta / 4.0).sqrt();
    Ok((1..=arcs.count())
        .map(|j| {
            let idx = ((j * arcs.k1).min(traj.n) * p) % count;
            2f64.sqrt() * mn - half * snap.phi[idx]
        })
        .collect())
}
