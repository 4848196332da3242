//! Reproducible random streams and the Verblunsky coefficient samplers.
//!
//! Every replica owns one [`RngStream`], a ChaCha8 generator keyed by the
//! 64-bit seed and positioned on its own 64-bit stream. ChaCha streams with
//! distinct stream ids share a key but never overlap, so replicas are
//! independent by construction and can be generated in any order.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use std::f64::consts::TAU;

use crate::error::{invalid, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn set_position(&mut self, words: u128) {
        self.rng.set_word_pos(words);
    }

    /// Skip ahead by `count` calls to [`RngStream::uniform`], each of which
    /// consumes exactly two words.
    pub fn skip_uniforms(&mut self, count: u64) {
        let pos = self.rng.get_word_pos();
        self.rng.set_word_pos(pos + 2 * count as u128);
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    /// Gamma(shape, 1) by the Marsaglia–Tsang squeeze method (shape < 1 uses
    /// the `U^{1/shape}` boost).
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        let g = Gamma::new(shape, 1.0).map_err(|e| invalid("shape", e.to_string()))?;
        Ok(g.sample(&mut self.rng))
    }

    #[inline]
    pub fn angle(&mut self) -> f64 {
        TAU * self.uniform()
    }

    /// Poisson(lambda) count.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if lambda <= 0.0 {
            return 0;
        }
        let p = rand_distr::Poisson::new(lambda).expect("positive finite lambda");
        p.sample(&mut self.rng) as u64
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn new_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

/// A Verblunsky coefficient γ_k of the CβE model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verblunsky {
    pub k: usize,
    pub beta: f64,
    pub gamma: Complex64,
}

/// Shape parameter β(k+1)/2 of the Gamma variable behind γ_k.
#[inline]
pub fn beta_k_sq(k: usize, beta: f64) -> f64 {
    beta * (k as f64 + 1.0) / 2.0
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// γ = sqrt(E/(E+Γ)) e^{iΘ} with E ~ Exp(1), Γ ~ Gamma(β(k+1)/2), Θ uniform.
pub fn sample_verblunsky(s: &mut RngStream, k: usize, beta: f64) -> Result<Verblunsky> {
    check_beta(beta)?;
    Ok(Verblunsky {
        k,
        beta,
        gamma: draw_gamma_coefficient(s, k, beta),
    })
}

#[inline]
fn draw_gamma_coefficient(s: &mut RngStream, k: usize, beta: f64) -> Complex64 {
    let e = s.exp1();
    let g = Gamma::new(beta_k_sq(k, beta), 1.0)
        .expect("validated shape")
        .sample(&mut s.rng);
    let r = (e / (e + g)).sqrt();
    Complex64::from_polar(r, s.angle())
}

/// The coefficients γ_0, …, γ_{n−1} drawn in order from one stream.
pub fn verblunsky_sequence(s: &mut RngStream, n: usize, beta: f64) -> Result<Vec<Complex64>> {
    check_beta(beta)?;
    Ok((0..n).map(|k| draw_gamma_coefficient(s, k, beta)).collect())
}

/// Z = X + iY with X, Y iid N(0, 1/2).
#[inline]
pub fn sample_std_complex_gaussian(s: &mut RngStream) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(h * s.normal(), h * s.normal())
}

/// The pair (Z_k, Γ^a_k) with γ_k = Z_k / sqrt(|Z_k|² + Γ^a_k).
pub fn sample_gamma_decomposition(s: &mut RngStream, k: usize, beta: f64) -> Result<(Complex64, f64)> {
    check_beta(beta)?;
    let z = sample_std_complex_gaussian(s);
    let g = s.gamma(beta_k_sq(k, beta))?;
    Ok((z, g))
}

pub fn reconstruct_gamma(z: Complex64, gamma_a: f64) -> Complex64 {
    z / (z.norm_sqr() + gamma_a).sqrt()
}
