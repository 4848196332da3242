use num_complex::Complex64;
use std::f64::consts::TAU;

use super::{prufer_step, FieldTrajectory};
use crate::error::{Error, Result};

/// Ψ_k(θ) at a single angle, k = gammas.len().
pub fn psi_at(gammas: &[Complex64], theta: f64) -> f64 {
    gammas.iter().fold(theta, |psi, g| prufer_step(psi, theta, *g))
}

#[inline]
fn floor_turns(x: f64) -> f64 {
    (x / TAU).floor()
}

/// Eigenvalue counting function N(θ) ∈ 2πℤ of X_n on (0, θ], where
/// n = gammas.len() + 1 and `alpha` is the unit-modulus last coefficient.
///
/// Zeros of X_n sit where Ψ_{n−1}(θ) + arg α ∈ 2πℤ, so N counts the lattice
/// crossings of the monotone phase.
pub fn counting_function(gammas: &[Complex64], alpha: Complex64, theta: f64) -> f64 {
    let a = alpha.arg();
    let u0 = psi_at(gammas, 0.0) + a;
    let u = psi_at(gammas, theta) + a;
    TAU * (floor_turns(u) - floor_turns(u0))
}

/// N(θ) on the mesh of a trajectory sitting at step n − 1. The mesh must
/// start at θ = 0.
pub fn counting_function_on(traj: &FieldTrajectory, alpha: Complex64) -> Result<Vec<f64>> {
    if traj.theta.first() != Some(&0.0) {
        return Err(Error::MeshIncompatible("counting function needs θ = 0 on the mesh".into()));
    }
    let a = alpha.arg();
    let base = floor_turns(traj.psi[0] + a);
    Ok(traj.psi.iter().map(|p| TAU * (floor_turns(p + a) - base)).collect())
}

/// The n eigenangles of X_n in [0, 2π), ascending, by bisection on the
/// monotone phase Ψ_{n−1}.
pub fn eigenangles(gammas: &[Complex64], alpha: Complex64) -> Vec<f64> {
    let n = gammas.len() + 1;
    let a = alpha.arg();
    let u = |t: f64| psi_at(gammas, t) + a;
    let j0 = floor_turns(u(0.0));
    let mut out = Vec::with_capacity(n);
    let mut lo_prev = 0.0;
    for j in 1..=n {
        let target = TAU * (j0 + j as f64);
        let (mut lo, mut hi) = (lo_prev, TAU);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if u(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let root = 0.5 * (lo + hi);
        out.push(root);
        lo_prev = lo;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_roots_when_coefficients_vanish() {
        // γ ≡ 0: X_n(z) = 1 − α z^n, roots at (2πj − arg α)/n
        let g = vec![Complex64::new(0.0, 0.0); 3];
        let alpha = Complex64::cis(0.9);
        let roots = eigenangles(&g, alpha);
        for r in &roots {
            let z = Complex64::cis(*r);
            assert!((Complex64::new(1.0, 0.0) - alpha * z.powu(4)).norm() < 1e-12);
        }
        assert_eq!(roots.len(), 4);
    }

    #[test]
    fn counting_totals() {
        let g = vec![Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.5)];
        let alpha = Complex64::cis(2.0);
        assert_eq!(counting_function(&g, alpha, 0.0), 0.0);
        let end = counting_function(&g, alpha, TAU - 1e-12);
        assert!((end - TAU * 3.0).abs() < 1e-9);
    }
}
