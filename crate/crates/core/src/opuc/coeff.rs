use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_ORACLE_CAP: usize = 4096;

/// Coefficient arrays (lowest degree first) of Φ_n and Φ*_n from the Szegő
/// recurrence Φ_{k+1} = zΦ_k − conj(γ_k)Φ*_k, Φ*_{k+1} = Φ*_k − γ_k zΦ_k.
///
/// This is the quadratic-cost reference path and is capped at `cap`.
pub fn szego_coefficients(gammas: &[Complex64], n: usize, cap: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    if gammas.len() < n {
        return Err(invalid("gammas", format!("need {n} coefficients, got {}", gammas.len())));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut phi = vec![zero; n + 1];
    let mut star = vec![zero; n + 1];
    phi[0] = Complex64::new(1.0, 0.0);
    star[0] = Complex64::new(1.0, 0.0);
    for (k, g) in gammas.iter().take(n).enumerate() {
        let gc = g.conj();
        // in place, highest degree first so that the shifted zΦ_k reads old values
        for d in (0..=k + 1).rev() {
            let zphi = if d > 0 { phi[d - 1] } else { zero };
            let new_phi = zphi - gc * star[d];
            let new_star = star[d] - g * zphi;
            phi[d] = new_phi;
            star[d] = new_star;
        }
    }
    Ok((phi, star))
}

#[inline]
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Coefficients of X_n(z) = Φ*_{n−1}(z) − α z Φ_{n−1}(z).
pub fn char_poly_coefficients(gammas: &[Complex64], n: usize, alpha: Complex64, cap: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let (phi, star) = szego_coefficients(gammas, n - 1, cap)?;
    let mut x = vec![Complex64::new(0.0, 0.0); n + 1];
    for d in 0..n {
        x[d] += star[d];
        x[d + 1] -= alpha * phi[d];
    }
    Ok(x)
}

/// X_n(e^{iθ}) from coefficient arrays.
pub fn eval_char_poly_coeffs(gammas: &[Complex64], n: usize, theta: f64, alpha: Complex64, cap: usize) -> Result<Complex64> {
    let x = char_poly_coefficients(gammas, n, alpha, cap)?;
    Ok(horner(&x, Complex64::cis(theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{verblunsky_sequence, RngStream};

    #[test]
    fn degree_zero_is_one() {
        let (p, s) = szego_coefficients(&[], 0, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(p, vec![Complex64::new(1.0, 0.0)]);
        assert_eq!(s, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn reversal_identity() {
        let mut s = RngStream::new(5, 0);
        let g = verblunsky_sequence(&mut s, 20, 1.5).unwrap();
        let (p, st) = szego_coefficients(&g, 20, DEFAULT_ORACLE_CAP).unwrap();
        for d in 0..=20 {
            assert_eq!(st[d], p[20 - d].conj());
        }
    }

    #[test]
    fn cap_enforced() {
        let g = vec![Complex64::new(0.1, 0.0); 10];
        assert!(matches!(szego_coefficients(&g, 10, 5), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn two_step_by_hand() {
        let g0 = Complex64::new(0.3, 0.1);
        let g1 = Complex64::new(-0.2, 0.4);
        let (p, s) = szego_coefficients(&[g0, g1], 2, 10).unwrap();
        // Φ_1 = z − conj g0, Φ*_1 = 1 − g0 z
        // Φ_2 = zΦ_1 − conj g1 Φ*_1 = z² − (conj g0 − conj g1 g0) z − conj g1
        let want_p = [-g1.conj(), -g0.conj() + g1.conj() * g0, Complex64::new(1.0, 0.0)];
        for d in 0..3 {
            assert!((p[d] - want_p[d]).norm() < 1e-15);
            assert!((s[d] - want_p[2 - d].conj()).norm() < 1e-15);
        }
    }
}
