//! The field engine.
//!
//! A [`FieldTrajectory`] holds, on a θ-mesh, the Prüfer phase Ψ_k(θ), the
//! field φ_k(θ) and the running complex logarithm 2 log Φ*_k(e^{iθ}). All
//! three are advanced together by [`FieldTrajectory::advance`], which reads
//! one Verblunsky coefficient per step and uses the pre-update phase for
//! every quantity. Ψ is stored unwrapped, so it stays monotone in θ and can
//! be used directly as an eigenvalue counter.

mod coeff;
mod counting;
mod io;
pub mod transfer;

pub use coeff::{char_poly_coefficients, eval_char_poly_coeffs, horner, szego_coefficients, DEFAULT_ORACLE_CAP};
pub use counting::{counting_function, counting_function_on, eigenangles, psi_at};
pub use io::{read_binary, write_binary, write_csv};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::rng::{verblunsky_sequence, RngStream};

/// The direction σ ∈ {1, i} selecting which part of the log field is studied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    #[default]
    Real,
    Imaginary,
}

impl Sigma {
    pub fn unit(self) -> Complex64 {
        match self {
            Sigma::Real => Complex64::new(1.0, 0.0),
            Sigma::Imaginary => Complex64::new(0.0, 1.0),
        }
    }

    /// 2 Re(σ w).
    #[inline]
    pub fn project2(self, w: Complex64) -> f64 {
        match self {
            Sigma::Real => 2.0 * w.re,
            Sigma::Imaginary => -2.0 * w.im,
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sigma::Real => "real",
            Sigma::Imaginary => "imaginary",
        })
    }
}

impl FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "real" | "re" => Ok(Sigma::Real),
            "i" | "imaginary" | "im" => Ok(Sigma::Imaginary),
            _ => Err(invalid("sigma", format!("expected 1|real|i|imaginary, got `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshKind {
    Uniform { count: usize },
    Arcs { k1: usize, k5: usize },
    Custom,
}

/// A sorted set of angles in [0, 2π).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n: usize,
    pub points: Vec<f64>,
    pub kind: MeshKind,
}

impl Mesh {
    /// `count` equally spaced angles 2πj/count, j = 0..count.
    pub fn uniform(n: usize, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("count", "mesh needs at least one point"));
        }
        let h = TAU / count as f64;
        Ok(Self {
            n,
            points: (0..count).map(|j| j as f64 * h).collect(),
            kind: MeshKind::Uniform { count },
        })
    }

    /// The lattice 2π/(4 k5 n)·ℤ ∩ [0, 2π), annotated with the arc size `k1`.
    pub fn arcs(n: usize, k1: usize, k5: usize) -> Result<Self> {
        if k1 == 0 || k1 > n {
            return Err(invalid("k1", format!("need 1 <= k1 <= n, got k1={k1}, n={n}")));
        }
        if k5 == 0 {
            return Err(invalid("k5", "must be positive"));
        }
        let mut m = Self::uniform(n, 4 * k5 * n)?;
        m.kind = MeshKind::Arcs { k1, k5 };
        Ok(m)
    }

    pub fn from_points(n: usize, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "empty mesh"));
        }
        for w in points.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid("points", "mesh must be strictly increasing"));
            }
        }
        if points[0] < 0.0 || *points.last().unwrap() >= TAU {
            return Err(invalid("points", "mesh must lie in [0, 2π)"));
        }
        Ok(Self {
            n,
            points,
            kind: MeshKind::Custom,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Spacing for uniform and arc meshes.
    pub fn pitch(&self) -> Option<f64> {
        match self.kind {
            MeshKind::Uniform { count } => Some(TAU / count as f64),
            MeshKind::Arcs { .. } => Some(TAU / self.points.len() as f64),
            MeshKind::Custom => None,
        }
    }
}

/// One Prüfer step Ψ ↦ Ψ + θ − 2 Im log(1 − γ e^{iΨ}).
#[inline]
pub fn prufer_step(psi: f64, theta: f64, gamma: Complex64) -> f64 {
    let w = Complex64::new(1.0, 0.0) - gamma * Complex64::cis(psi);
    psi + theta - 2.0 * w.im.atan2(w.re)
}

/// One relative Prüfer step ψ ↦ ψ + θ − 2 Im(log(1 − γe^{iψ}) − log(1 − γ)).
#[inline]
pub fn relative_prufer_step(psi: f64, theta: f64, gamma: Complex64) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let w = one - gamma * Complex64::cis(psi);
    let w0 = one - gamma;
    psi + theta - 2.0 * (w.im.atan2(w.re) - w0.im.atan2(w0.re))
}

/// Increment 2 log(1 − γ e^{iΨ}) shared by the field and log Φ* updates.
#[inline]
pub fn log_increment(psi: f64, gamma: Complex64) -> Complex64 {
    let w = Complex64::new(1.0, 0.0) - gamma * Complex64::cis(psi);
    Complex64::new(w.norm_sqr().ln(), 2.0 * w.im.atan2(w.re))
}

/// One field step φ ↦ φ + 2 Re(σ log(1 − γ e^{iΨ})) using the pre-update Ψ.
#[inline]
pub fn field_step(phi: f64, psi: f64, gamma: Complex64, sigma: Sigma) -> f64 {
    phi + sigma.project2(0.5 * log_increment(psi, gamma))
}

/// A stored copy of the mesh state after `k` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub logphi_star: Vec<Complex64>,
    pub rel_psi: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckpointSchedule {
    #[default]
    None,
    /// Every power of two up to n, plus n itself.
    Dyadic,
    At(Vec<usize>),
}

impl CheckpointSchedule {
    pub fn steps(&self, n: usize) -> Vec<usize> {
        let mut v = match self {
            CheckpointSchedule::None => vec![],
            CheckpointSchedule::Dyadic => {
                let mut v = vec![];
                let mut k = 1;
                while k <= n {
                    v.push(k);
                    k *= 2;
                }
                v.push(n);
                v
            }
            CheckpointSchedule::At(ks) => ks.iter().copied().filter(|&k| k <= n).collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Mesh state (Ψ_k, φ_k, 2 log Φ*_k) and optional relative phase ψ_k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTrajectory {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub sigma: Sigma,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub logphi_star: Vec<Complex64>,
    pub rel_psi: Option<Vec<f64>>,
    pub snapshots: BTreeMap<usize, Snapshot>,
}

impl FieldTrajectory {
    /// Initial state: Ψ_0 = θ, φ_0 = 0, Φ*_0 = 1.
    pub fn new(mesh: &Mesh, sigma: Sigma, beta: f64) -> Self {
        Self::on_points(mesh.n, mesh.points.clone(), sigma, beta)
    }

    /// Initial state on arbitrary angles, which need not be sorted or lie in
    /// [0, 2π).
    pub fn on_points(n: usize, theta: Vec<f64>, sigma: Sigma, beta: f64) -> Self {
        let m = theta.len();
        Self {
            n,
            k: 0,
            beta,
            sigma,
            psi: theta.clone(),
            theta,
            phi: vec![0.0; m],
            logphi_star: vec![Complex64::new(0.0, 0.0); m],
            rel_psi: None,
            snapshots: BTreeMap::new(),
        }
    }

    /// Also track the relative Prüfer phase ψ_k, starting from ψ_0 = θ.
    pub fn with_relative_phase(mut self) -> Self {
        self.rel_psi = Some(self.theta.clone());
        self
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Apply γ_k to every mesh point and move to step k + 1.
    pub fn advance(&mut self, gamma: Complex64) {
        let sigma = self.sigma;
        for i in 0..self.theta.len() {
            let psi = self.psi[i];
            let inc = log_increment(psi, gamma);
            self.phi[i] += sigma.project2(0.5 * inc);
            self.logphi_star[i] += inc;
            self.psi[i] = psi + self.theta[i] - inc.im;
        }
        if let Some(rel) = self.rel_psi.as_mut() {
            for (r, &t) in rel.iter_mut().zip(&self.theta) {
                *r = relative_prufer_step(*r, t, gamma);
            }
        }
        self.k += 1;
    }

    pub fn advance_all(&mut self, gammas: &[Complex64]) {
        for g in gammas {
            self.advance(*g);
        }
    }

    pub fn take_snapshot(&mut self) {
        let snap = Snapshot {
            k: self.k,
            psi: self.psi.clone(),
            phi: self.phi.clone(),
            logphi_star: self.logphi_star.clone(),
            rel_psi: self.rel_psi.clone(),
        };
        self.snapshots.insert(self.k, snap);
    }

    pub fn snapshot(&self, k: usize) -> Result<&Snapshot> {
        self.snapshots.get(&k).ok_or(Error::MissingSnapshot(k))
    }

    /// X_n(e^{iθ_i}) = Φ*_{n−1}(e^{iθ_i})(1 − α e^{iΨ_{n−1}(θ_i)}), valid
    /// when the trajectory sits at step n − 1.
    pub fn char_poly_at(&self, i: usize, alpha: Complex64) -> Complex64 {
        let phistar = (0.5 * self.logphi_star[i]).exp();
        phistar * (Complex64::new(1.0, 0.0) - alpha * Complex64::cis(self.psi[i]))
    }

    /// log X_n on the mesh, continuing the branch of log Φ*_{n−1}.
    pub fn log_char_poly(&self, alpha: Complex64) -> Vec<Complex64> {
        (0..self.len())
            .map(|i| {
                let w = Complex64::new(1.0, 0.0) - alpha * Complex64::cis(self.psi[i]);
                0.5 * self.logphi_star[i] + w.ln()
            })
            .collect()
    }

    /// Index of the largest φ, ties to the smallest θ.
    pub fn argmax_phi(&self) -> usize {
        argmax_first(&self.phi)
    }

    /// True when Ψ is nondecreasing along the (sorted) mesh.
    pub fn psi_is_monotone(&self) -> bool {
        self.psi.windows(2).all(|w| w[1] >= w[0])
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Memory ceiling in MiB from `CBE_MEM_CAP_MB`, default 4096.
pub fn memory_cap_mb() -> usize {
    std::env::var("CBE_MEM_CAP_MB")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(4096)
}

fn check_budget(mesh_len: usize, snapshots: usize, relative: bool) -> Result<()> {
    let per_point = 32 + if relative { 8 } else { 0 } + 8;
    let bytes = mesh_len as u128 * per_point as u128 * (snapshots as u128 + 1);
    let needed_mb = bytes.div_ceil(1 << 20) as usize;
    let cap_mb = memory_cap_mb();
    if needed_mb > cap_mb {
        return Err(Error::MemoryBudget { needed_mb, cap_mb });
    }
    Ok(())
}

/// Draw γ_0..γ_{n−1} from `stream` and advance a trajectory on `mesh`,
/// storing snapshots on `schedule`.
pub fn run_field(
    stream: &mut RngStream,
    n: usize,
    mesh: &Mesh,
    sigma: Sigma,
    beta: f64,
    schedule: &CheckpointSchedule,
) -> Result<FieldTrajectory> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let gammas = verblunsky_sequence(stream, n, beta)?;
    run_field_with(&gammas, mesh, sigma, beta, schedule, false)
}

/// Advance a trajectory with a given coefficient sequence.
pub fn run_field_with(
    gammas: &[Complex64],
    mesh: &Mesh,
    sigma: Sigma,
    beta: f64,
    schedule: &CheckpointSchedule,
    track_relative: bool,
) -> Result<FieldTrajectory> {
    let n = gammas.len();
    let steps = schedule.steps(n);
    check_budget(mesh.len(), steps.len(), track_relative)?;
    let mut traj = FieldTrajectory::new(mesh, sigma, beta);
    traj.n = n;
    if track_relative {
        traj = traj.with_relative_phase();
    }
    let mut next = steps.iter().peekable();
    if next.peek() == Some(&&0) {
        traj.take_snapshot();
        next.next();
    }
    for g in gammas {
        traj.advance(*g);
        if next.peek() == Some(&&traj.k) {
            traj.take_snapshot();
            next.next();
        }
    }
    Ok(traj)
}
