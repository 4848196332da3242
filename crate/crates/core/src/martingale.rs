//! Derivative martingale D_k, its mass B_k, the moment generating function
//! of the field increments and the proper martingale D̂_j.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{SQRT_2, TAU};

use crate::error::{invalid, Error, Result};
use crate::opuc::{run_field_with, transfer, CheckpointSchedule, Mesh, Sigma};
use crate::rng::{beta_k_sq, verblunsky_sequence, RngStream};
use crate::special::ln_gamma_ratio_complex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSnapshot {
    pub k: usize,
    pub density: Vec<f64>,
    pub mass: f64,
    pub proper_density: Vec<f64>,
    pub proper_mass: f64,
}

fn check_dyadic(k: usize, strict: bool) -> Result<()> {
    if k < 2 {
        return Err(invalid("k", "must be at least 2"));
    }
    if strict && !k.is_power_of_two() {
        return Err(Error::NonDyadic(k));
    }
    Ok(())
}

/// s_β = sqrt(β/2).
#[inline]
pub fn s_beta(beta: f64) -> f64 {
    (beta / 2.0).sqrt()
}

/// Periodic trapezoid rule on a uniform mesh of [0, 2π).
fn periodic_integral(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    TAU * values.iter().sum::<f64>() / values.len() as f64
}

/// D_k on a uniform mesh and B_k = ∫ D_k dθ.
pub fn derivative_density(phi: &[f64], k: usize, beta: f64, strict: bool) -> Result<(Vec<f64>, f64)> {
    check_dyadic(k, strict)?;
    let lk = (k as f64).ln();
    let a = s_beta(beta);
    let b = (beta / 4.0).sqrt();
    let d: Vec<f64> = phi
        .iter()
        .map(|&p| {
            let lin = SQRT_2 * lk - b * p;
            if lin > 0.0 {
                (a * p - lk).exp() * lin / TAU
            } else {
                0.0
            }
        })
        .collect();
    let mass = periodic_integral(&d);
    Ok((d, mass))
}

/// E[e^{s Re log(1−γ_j) + t Im log(1−γ_j)}] for real s, t.
pub fn mgf(s: f64, t: f64, j: usize, beta: f64) -> Result<f64> {
    Ok(ln_mgf(s, t, j, beta)?.exp())
}

pub fn ln_mgf(s: f64, t: f64, j: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    let b2 = beta_k_sq(j, beta);
    if s <= -1.0 - b2 {
        return Err(Error::Numerical(format!("Gamma pole at s = {s}, j = {j}")));
    }
    let x = Complex64::new(1.0 + b2, 0.0);
    let h = Complex64::new(s, t) / 2.0;
    let v = ln_gamma_ratio_complex(x, Complex64::new(s, 0.0)) - ln_gamma_ratio_complex(x, h) - ln_gamma_ratio_complex(x, h.conj());
    Ok(v.re)
}

/// H_k(s) = log E[e^{2s Re(σ log(1−γ_k))}].
pub fn h_k(s: f64, k: usize, beta: f64, sigma: Sigma) -> Result<f64> {
    match sigma {
        Sigma::Real => ln_mgf(2.0 * s, 0.0, k, beta),
        // 2 Re(i log w) = −2 Im log w
        Sigma::Imaginary => ln_mgf(0.0, -2.0 * s, k, beta),
    }
}

/// H'_k(s) by central difference with relative step 10⁻⁶.
pub fn h_k_prime(s: f64, k: usize, beta: f64, sigma: Sigma) -> Result<f64> {
    let h = 1e-6 * s.abs().max(1.0);
    Ok((h_k(s + h, k, beta, sigma)? - h_k(s - h, k, beta, sigma)?) / (2.0 * h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerSums {
    pub j: usize,
    pub sum_h: f64,
    pub sum_h_prime: f64,
    /// Σ H_k(s_β) − log j
    pub g_estimate: f64,
    /// Σ H'_k(s_β) − sqrt(8/β) log j
    pub h_estimate: f64,
}

/// Partial sums Σ_{k=lo}^{hi} of H_k(s_β) and H'_k(s_β).
fn sums(lo: usize, hi: usize, beta: f64, sigma: Sigma) -> Result<(f64, f64)> {
    let s = s_beta(beta);
    let (mut a, mut b) = (0.0, 0.0);
    for k in lo..=hi {
        a += h_k(s, k, beta, sigma)?;
        b += h_k_prime(s, k, beta, sigma)?;
    }
    Ok((a, b))
}

/// Σ_{k=1}^{j} H_k(s_β), Σ_{k=1}^{j} H'_k(s_β) and the centred limits.
pub fn normalizer_sums(j: usize, beta: f64, sigma: Sigma) -> Result<NormalizerSums> {
    if j < 2 {
        return Err(invalid("j_max", "must be at least 2"));
    }
    let (a, b) = sums(1, j, beta, sigma)?;
    let lj = (j as f64).ln();
    Ok(NormalizerSums {
        j,
        sum_h: a,
        sum_h_prime: b,
        g_estimate: a - lj,
        h_estimate: b - (8.0 / beta).sqrt() * lj,
    })
}

/// D̂_j = e^{s_β φ_j − ΣH}(ΣH' − φ_j) and B̂_j = (1/2π)∫ D̂_j dθ. The sums
/// run over the coefficients γ_0..γ_{j−1} that build φ_j, so that D̂_j is
/// exactly a martingale in j.
pub fn proper_martingale(phi: &[f64], j: usize, beta: f64, sigma: Sigma) -> Result<(Vec<f64>, f64)> {
    if j == 0 {
        return Err(invalid("j", "must be at least 1"));
    }
    let (sh, shp) = sums(0, j - 1, beta, sigma)?;
    let s = s_beta(beta);
    let d: Vec<f64> = phi.iter().map(|&p| (s * p - sh).exp() * (shp - p)).collect();
    let mass = periodic_integral(&d) / TAU;
    Ok((d, mass))
}

/// sqrt(4/β) D̃_j e^{log j − ΣH} − D̂_j − M_j (sqrt(8/β) log j − ΣH'),
/// pointwise, where D̃_j is D_j without the positive part and without 1/2π.
/// Vanishes identically.
pub fn identity_residual(phi: &[f64], j: usize, beta: f64, sigma: Sigma) -> Result<Vec<f64>> {
    let (sh, shp) = sums(0, j - 1, beta, sigma)?;
    let (dhat, _) = proper_martingale(phi, j, beta, sigma)?;
    let s = s_beta(beta);
    let lj = (j as f64).ln();
    Ok(phi
        .iter()
        .zip(dhat)
        .map(|(&p, dh)| {
            let dt = (s * p - lj).exp() * (SQRT_2 * lj - (beta / 4.0).sqrt() * p);
            let m = (s * p - sh).exp();
            (4.0 / beta).sqrt() * dt * (lj - sh).exp() - dh - m * ((8.0 / beta).sqrt() * lj - shp)
        })
        .collect())
}

/// ∫ e^{s_β φ_k − log k}|sqrt(2) log k − sqrt(β/4) φ_k| 1{dev ∉ [η/2, 2/η]} dθ,
/// dev = (sqrt(2) log k − sqrt(β/4) φ_k)/sqrt(log k).
pub fn truncation_mass(phi: &[f64], k: usize, beta: f64, eta: f64) -> Result<f64> {
    check_dyadic(k, true)?;
    if !(eta > 0.0 && eta < 2.0) {
        return Err(invalid("eta", "must lie in (0, 2)"));
    }
    let lk = (k as f64).ln();
    let a = s_beta(beta);
    let b = (beta / 4.0).sqrt();
    let (lo, hi) = (eta / 2.0, 2.0 / eta);
    let v: Vec<f64> = phi
        .iter()
        .map(|&p| {
            let lin = SQRT_2 * lk - b * p;
            let dev = lin / lk.sqrt();
            if dev < lo || dev > hi {
                (a * p - lk).exp() * lin.abs()
            } else {
                0.0
            }
        })
        .collect();
    Ok(periodic_integral(&v))
}

pub fn snapshot(phi: &[f64], k: usize, beta: f64, sigma: Sigma, strict: bool) -> Result<MartingaleSnapshot> {
    let (density, mass) = derivative_density(phi, k, beta, strict)?;
    let (proper_density, proper_mass) = proper_martingale(phi, k, beta, sigma)?;
    Ok(MartingaleSnapshot {
        k,
        density,
        mass,
        proper_density,
        proper_mass,
    })
}

/// φ_k at 2^{j} for j in `levels`, on a uniform mesh of `mesh_factor · 2^{max}`
/// points, from a given coefficient sequence. σ = 1 uses the FFT product
/// tree; σ = i runs the pointwise recursion.
pub fn dyadic_fields_from(
    gammas: &[Complex64],
    levels: std::ops::RangeInclusive<u32>,
    mesh_factor: usize,
    beta: f64,
    sigma: Sigma,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let ks: Vec<usize> = levels.map(|j| 1usize << j).collect();
    let kmax = *ks.last().ok_or_else(|| invalid("levels", "empty"))?;
    if gammas.len() < kmax {
        return Err(invalid("gammas", "shorter than the largest level"));
    }
    let m = mesh_factor * kmax;
    match sigma {
        Sigma::Real => Ok(transfer::szego_prefixes(gammas, &ks)
            .into_iter()
            .map(|(k, ps)| (k, transfer::field_on_roots(&ps, m)))
            .collect()),
        Sigma::Imaginary => {
            let mesh = Mesh::uniform(kmax, m)?;
            let traj = run_field_with(&gammas[..kmax], &mesh, sigma, beta, &CheckpointSchedule::At(ks.clone()), false)?;
            ks.iter().map(|&k| Ok((k, traj.snapshot(k)?.phi.clone()))).collect()
        }
    }
}

/// Draw coefficients from `stream` and return dyadic fields as in
/// [`dyadic_fields_from`].
pub fn dyadic_fields(
    stream: &mut RngStream,
    levels: std::ops::RangeInclusive<u32>,
    mesh_factor: usize,
    beta: f64,
    sigma: Sigma,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let kmax = 1usize << *levels.end();
    let g = verblunsky_sequence(stream, kmax, beta)?;
    dyadic_fields_from(&g, levels, mesh_factor, beta, sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub replica: usize,
    pub k: usize,
    pub b_k: f64,
    pub b_hat_k: f64,
    pub excluded_mass: f64,
}

/// One replica: B_k, B̂_k and the excluded mass at each dyadic level.
pub fn replica_rows(
    replica: usize,
    stream: &mut RngStream,
    levels: std::ops::RangeInclusive<u32>,
    mesh_factor: usize,
    beta: f64,
    sigma: Sigma,
    eta: f64,
) -> Result<Vec<MartingaleRow>> {
    dyadic_fields(stream, levels, mesh_factor, beta, sigma)?
        .into_iter()
        .map(|(k, phi)| {
            let s = snapshot(&phi, k, beta, sigma, true)?;
            Ok(MartingaleRow {
                replica,
                k,
                b_k: s.mass,
                b_hat_k: s.proper_mass,
                excluded_mass: truncation_mass(&phi, k, beta, eta)?,
            })
        })
        .collect()
}

/// B_k for a flat field φ ≡ 0, sqrt(2) log k / k.
pub fn flat_mass(k: usize) -> f64 {
    SQRT_2 * (k as f64).ln() / k as f64
}
