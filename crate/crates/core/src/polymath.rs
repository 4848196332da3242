//! Polynomial kernels on the unit circle: Fejér kernels, Bernstein ratios,
//! the roots-of-unity interpolation bounds and FFT evaluation.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Result};
use crate::special::golden_max;

/// A polynomial Σ c_d z^d, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirclePoly {
    pub coeffs: Vec<Complex64>,
}

impl CirclePoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// z^k.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); k + 1];
        c[k] = Complex64::new(1.0, 0.0);
        Self::new(c)
    }

    /// Index of the last nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != Complex64::new(0.0, 0.0))
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        crate::opuc::horner(&self.coeffs, z)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::new(vec![Complex64::new(0.0, 0.0)]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(d, c)| c * d as f64)
                .collect(),
        )
    }

    /// All complex zeros by the Aberth–Ehrlich iteration, started on a
    /// circle of radius given by the Fujiwara bound.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let k = self.degree();
        if self.is_zero() {
            return Err(invalid("Q", "zero polynomial"));
        }
        if k == 0 {
            return Ok(vec![]);
        }
        let lead = self.coeffs[k];
        let monic: Vec<Complex64> = self.coeffs[..=k].iter().map(|c| c / lead).collect();
        let radius = (0..k)
            .map(|d| (monic[d].norm()).powf(1.0 / (k - d) as f64))
            .fold(0.0, f64::max)
            .max(1e-3);
        let p = CirclePoly::new(monic);
        let dp = p.derivative();
        let mut z: Vec<Complex64> = (0..k)
            .map(|j| Complex64::from_polar(radius, TAU * j as f64 / k as f64 + 0.4))
            .collect();
        for _ in 0..500 {
            let mut moved: f64 = 0.0;
            for i in 0..k {
                let pv = p.eval(z[i]);
                if pv.norm() == 0.0 {
                    continue;
                }
                let ratio = pv / dp.eval(z[i]);
                let s: Complex64 = (0..k).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
                let w = ratio / (1.0 - ratio * s);
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1.0));
            }
            if moved < 1e-15 {
                break;
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::Error::Numerical("root iteration diverged".into()));
        }
        Ok(z)
    }
}

/// FFT-backed polynomial products with cached plans.
pub struct Convolver {
    planner: FftPlanner<f64>,
}

impl Default for Convolver {
    fn default() -> Self {
        Self::new()
    }
}

const NAIVE_CUTOFF: usize = 48;

impl Convolver {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    pub fn mul(&mut self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        if a.len().min(b.len()) <= NAIVE_CUTOFF {
            return naive_mul(a, b);
        }
        let out_len = a.len() + b.len() - 1;
        let size = out_len.next_power_of_two();
        let mut fa = self.forward(a, size);
        let fb = self.forward(b, size);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
        self.inverse(fa, out_len)
    }

    /// Σ_i a_i * b_i with one inverse transform.
    pub fn mul_sum(&mut self, pairs: &[(&[Complex64], &[Complex64])]) -> Vec<Complex64> {
        let out_len = pairs
            .iter()
            .map(|(a, b)| a.len() + b.len() - 1)
            .max()
            .unwrap_or(0);
        if pairs.iter().all(|(a, b)| a.len().min(b.len()) <= NAIVE_CUTOFF) {
            let mut acc = vec![Complex64::new(0.0, 0.0); out_len];
            for (a, b) in pairs {
                for (i, v) in naive_mul(a, b).into_iter().enumerate() {
                    acc[i] += v;
                }
            }
            return acc;
        }
        let size = out_len.next_power_of_two();
        let mut acc = vec![Complex64::new(0.0, 0.0); size];
        for (a, b) in pairs {
            let fa = self.forward(a, size);
            let fb = self.forward(b, size);
            for i in 0..size {
                acc[i] += fa[i] * fb[i];
            }
        }
        self.inverse(acc, out_len)
    }

    fn forward(&mut self, a: &[Complex64], size: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        buf[..a.len()].copy_from_slice(a);
        self.planner.plan_fft_forward(size).process(&mut buf);
        buf
    }

    fn inverse(&mut self, mut buf: Vec<Complex64>, out_len: usize) -> Vec<Complex64> {
        let size = buf.len();
        self.planner.plan_fft_inverse(size).process(&mut buf);
        let s = 1.0 / size as f64;
        buf.truncate(out_len);
        for x in buf.iter_mut() {
            *x *= s;
        }
        buf
    }

    /// Q(e^{2πij/M}) for j = 0..M, folding coefficients modulo M.
    pub fn eval_roots(&mut self, coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (d, c) in coeffs.iter().enumerate() {
            buf[d % m] += c;
        }
        // rustfft's inverse transform is Σ x_d e^{+2πi jd/M}, unnormalised
        self.planner.plan_fft_inverse(m).process(&mut buf);
        buf
    }
}

pub fn naive_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Q at the M-th roots of unity e^{2πij/M}.
pub fn eval_complex_at_roots(q: &CirclePoly, m: usize) -> Result<Vec<Complex64>> {
    if m < q.degree() + 1 {
        return Err(invalid("M", format!("need M >= degree+1 = {}, got {m}", q.degree() + 1)));
    }
    Ok(Convolver::new().eval_roots(&q.coeffs, m))
}

/// |Q|² at the M-th roots of unity e^{2πij/M}.
pub fn eval_at_roots(q: &CirclePoly, m: usize) -> Result<Vec<f64>> {
    Ok(eval_complex_at_roots(q, m)?.into_iter().map(|v| v.norm_sqr()).collect())
}

/// Max of f(θ) over the circle: grid of `grid` points, then golden-section
/// polish around the best few grid maxima. Returns (θ, value).
pub fn circle_max<F: Fn(f64) -> f64>(f: F, grid_values: &[f64], polish: usize) -> (f64, f64) {
    let m = grid_values.len();
    let h = TAU / m as f64;
    let mut idx: Vec<usize> = (0..m)
        .filter(|&i| {
            let l = grid_values[(i + m - 1) % m];
            let r = grid_values[(i + 1) % m];
            grid_values[i] >= l && grid_values[i] >= r
        })
        .collect();
    idx.sort_by(|&a, &b| grid_values[b].total_cmp(&grid_values[a]));
    idx.truncate(polish.max(1));
    let mut best = (0.0, f64::NEG_INFINITY);
    for &i in &idx {
        if grid_values[i] > best.1 {
            best = (i as f64 * h, grid_values[i]);
        }
        let c = i as f64 * h;
        let (t, v) = golden_max(&f, c - h, c + h, 60);
        if v > best.1 {
            best = (t.rem_euclid(TAU), v);
        }
    }
    best
}

fn max_modulus(q: &CirclePoly, grid: usize) -> f64 {
    let vals: Vec<f64> = Convolver::new()
        .eval_roots(&q.coeffs, grid)
        .into_iter()
        .map(|v| v.norm())
        .collect();
    circle_max(|t| q.eval(Complex64::cis(t)).norm(), &vals, 8).1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRatio {
    pub max_derivative: f64,
    pub k_max: f64,
    pub ratio: f64,
}

/// (max|Q'|, k·max|Q|, ratio) over a 64k-point grid with local polish.
pub fn bernstein_ratio(q: &CirclePoly) -> Result<BernsteinRatio> {
    if q.is_zero() {
        return Err(invalid("Q", "zero polynomial"));
    }
    let k = q.degree();
    if k < 1 {
        return Err(invalid("Q", "degree must be at least 1"));
    }
    let grid = 64 * k;
    let dq = q.derivative();
    let md = max_modulus(&dq, grid);
    let mq = max_modulus(q, grid);
    let k_max = k as f64 * mq;
    Ok(BernsteinRatio {
        max_derivative: md,
        k_max,
        ratio: md / k_max,
    })
}

/// F_m(z) = (1/m)|1 − z^m|²/|1 − z|² for |z| = 1, equal to m at z = 1.
pub fn fejer_kernel(m: usize, z: Complex64) -> f64 {
    fejer_kernel_angle(m, z.arg())
}

/// F_m(e^{iθ}) = sin²(mθ/2) / (m sin²(θ/2)).
pub fn fejer_kernel_angle(m: usize, theta: f64) -> f64 {
    let mf = m as f64;
    let theta = theta - TAU * (theta / TAU).round();
    let s = (0.5 * theta).sin();
    if s.abs() < 1e-8 {
        // Taylor expansion around the removable singularity
        let t2 = theta * theta;
        return mf * (1.0 - (mf * mf - 1.0) * t2 / 12.0);
    }
    let num = (0.5 * mf * theta).sin();
    num * num / (mf * s * s)
}

/// |Σ_{j=1}^{rm} F_m(e(t + j/(rm))) − rm|, e(x) = e^{2πix}.
pub fn fejer_sum_identity(m: usize, r: usize, t: f64) -> f64 {
    let rm = (r * m) as f64;
    let s: f64 = (1..=r * m)
        .map(|j| fejer_kernel_angle(m, TAU * (t + j as f64 / rm)))
        .sum();
    (s - rm).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBrackets {
    pub degree: usize,
    pub m: usize,
    pub b: f64,
    /// max |Q|² over the 2mk-th roots of unity.
    pub roots_max: f64,
    /// (m/(m−1))·roots_max.
    pub certified_upper: f64,
    /// max |Q|² over the circle (dense grid plus polish).
    pub circle_max: f64,
    pub near_max: f64,
    pub far_max: f64,
    pub near_min: f64,
    /// max and min of |Q|² over the window |z − 1| ≤ b/k.
    pub window_max: f64,
    pub window_min: f64,
    /// Smallest C making the near/far upper bound hold for this Q.
    pub required_c_upper: f64,
    /// Smallest C making the lower bound hold for this Q.
    pub required_c_lower: f64,
    /// sup over the window of b(m−1)·Σ_{ω∈F} 2/(km(m−1)|z − ω|²).
    pub far_sum_constant: f64,
}

fn half_window(k: usize, b: f64) -> f64 {
    let x = b / (2.0 * k as f64);
    if x >= 1.0 {
        PI
    } else {
        2.0 * x.asin()
    }
}

/// Far-root sum constant of the near/far bound for degree k.
pub fn far_sum_constant(k: usize, m: usize, b: f64) -> f64 {
    let big_m = 2 * m * k;
    let kf = k as f64;
    let mf = m as f64;
    let far: Vec<f64> = (0..big_m)
        .map(|j| TAU * j as f64 / big_m as f64)
        .filter(|&w| (Complex64::cis(w) - 1.0).norm() > 2.0 * b / kf)
        .collect();
    let sum_at = |t: f64| -> f64 {
        let z = Complex64::cis(t);
        far.iter()
            .map(|&w| 2.0 / (kf * mf * (mf - 1.0) * (z - Complex64::cis(w)).norm_sqr()))
            .sum::<f64>()
    };
    let hw = half_window(k, b);
    let steps = 64;
    let mut best: f64 = 0.0;
    for i in 0..=steps {
        let t = -hw + 2.0 * hw * i as f64 / steps as f64;
        best = best.max(sum_at(t));
    }
    best * b * (mf - 1.0)
}

/// All quantities appearing in the interpolation theorem for one Q.
pub fn interpolation_brackets(q: &CirclePoly, m: usize, b: f64) -> Result<InterpolationBrackets> {
    if m < 2 {
        return Err(invalid("m", "must be at least 2"));
    }
    if !(b > 0.0) {
        return Err(invalid("b", "must be positive"));
    }
    let k = q.degree().max(1);
    let big_m = 2 * m * k;
    let mut conv = Convolver::new();
    let roots: Vec<f64> = conv.eval_roots(&q.coeffs, big_m).iter().map(|v| v.norm_sqr()).collect();
    let kf = k as f64;
    let mf = m as f64;
    let mut near_max = f64::NEG_INFINITY;
    let mut near_min = f64::INFINITY;
    let mut far_max: f64 = 0.0;
    for (j, &v) in roots.iter().enumerate() {
        let w = Complex64::cis(TAU * j as f64 / big_m as f64);
        if (w - 1.0).norm() <= 2.0 * b / kf {
            near_max = near_max.max(v);
            near_min = near_min.min(v);
        } else {
            far_max = far_max.max(v);
        }
    }
    let roots_max = roots.iter().cloned().fold(0.0, f64::max);

    let f = |t: f64| q.eval(Complex64::cis(t)).norm_sqr();
    let grid = 64 * k.max(4);
    let dense: Vec<f64> = conv.eval_roots(&q.coeffs, grid).iter().map(|v| v.norm_sqr()).collect();
    let circle = circle_max(f, &dense, 8).1.max(roots_max);

    let hw = half_window(k, b);
    let wn = 2048;
    let mut window_max: f64 = 0.0;
    let mut window_min = f64::INFINITY;
    let mut arg_max = 0.0;
    let mut arg_min = 0.0;
    for i in 0..=wn {
        let t = -hw + 2.0 * hw * i as f64 / wn as f64;
        let v = f(t);
        if v > window_max {
            window_max = v;
            arg_max = t;
        }
        if v < window_min {
            window_min = v;
            arg_min = t;
        }
    }
    let h = 2.0 * hw / wn as f64;
    let (_, vmax) = golden_max(f, (arg_max - h).max(-hw), (arg_max + h).min(hw), 60);
    window_max = window_max.max(vmax);
    let (_, vmin) = golden_max(|t| -f(t), (arg_min - h).max(-hw), (arg_min + h).min(hw), 60);
    window_min = window_min.min(-vmin);

    let ratio = mf / (mf - 1.0);
    let required_c_upper = if far_max > 0.0 {
        (b * (mf - 1.0) * (window_max - ratio * near_max) / far_max).max(0.0)
    } else {
        0.0
    };
    let required_c_lower = if roots_max > 0.0 {
        (b * ((mf - 1.0) * (ratio * near_min - window_min) / roots_max - 1.0)).max(0.0)
    } else {
        0.0
    };

    Ok(InterpolationBrackets {
        degree: k,
        m,
        b,
        roots_max,
        certified_upper: ratio * roots_max,
        circle_max: circle,
        near_max,
        far_max,
        near_min,
        window_max,
        window_min,
        required_c_upper,
        required_c_lower,
        far_sum_constant: far_sum_constant(k, m, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn fft_mul_matches_naive() {
        let a: Vec<Complex64> = (0..100).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b: Vec<Complex64> = (0..77).map(|i| Complex64::new((i as f64 * 1.7).cos(), 0.1 * i as f64)).collect();
        let fast = Convolver::new().mul(&a, &b);
        let slow = naive_mul(&a, &b);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn roots_of_constant_and_monomial() {
        for q in [CirclePoly::from_real(&[1.0]), CirclePoly::monomial(1)] {
            let v = eval_at_roots(&q, 16).unwrap();
            assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-14));
        }
        assert!(eval_at_roots(&CirclePoly::monomial(5), 4).is_err());
    }

    #[test]
    fn bernstein_equality_and_hand_case() {
        let r = bernstein_ratio(&CirclePoly::monomial(7)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        let r = bernstein_ratio(&CirclePoly::from_real(&[1.0, 1.0])).unwrap();
        assert!((r.max_derivative - 1.0).abs() < 1e-12);
        assert!((r.k_max - 2.0).abs() < 1e-12);
        assert!((r.ratio - 0.5).abs() < 1e-12);
        assert!(bernstein_ratio(&CirclePoly::from_real(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn aberth_recovers_known_roots() {
        let want = [c(1.0), Complex64::new(0.0, 2.0), c(-0.5), Complex64::new(0.3, -0.7)];
        let mut coeffs = vec![c(1.0)];
        for r in want {
            coeffs = naive_mul(&coeffs, &[-r, c(1.0)]);
        }
        let got = CirclePoly::new(coeffs).roots().unwrap();
        for r in want {
            let best = got.iter().map(|g| (g - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "{r}");
        }
        assert!(CirclePoly::from_real(&[3.0]).roots().unwrap().is_empty());
    }

    #[test]
    fn fejer_values() {
        for m in 1..10 {
            assert!((fejer_kernel(m, c(1.0)) - m as f64).abs() < 1e-12);
        }
        assert!(fejer_kernel(2, c(-1.0)).abs() < 1e-15);
        // compare with the defining double sum
        let z = Complex64::cis(0.83);
        let m = 6;
        let direct: f64 = (0..m)
            .map(|r: i32| (-r..=r).map(|s| z.powi(s)).sum::<Complex64>().re)
            .sum::<f64>()
            / m as f64;
        assert!((fejer_kernel(m as usize, z) - direct).abs() < 1e-12);
    }

    #[test]
    fn fejer_sums() {
        assert_eq!(fejer_sum_identity(1, 1, 0.3), 0.0);
        assert!(fejer_sum_identity(8, 4, 0.137) < 1e-10);
        assert!(fejer_sum_identity(16, 2, 2f64.sqrt() / 3.0) < 1e-10);
    }

    #[test]
    fn constant_brackets() {
        let q = CirclePoly::from_real(&[2.0]);
        let br = interpolation_brackets(&q, 4, 1.0).unwrap();
        assert!((br.roots_max - 4.0).abs() < 1e-12);
        assert!((br.circle_max - 4.0).abs() < 1e-12);
        assert!((br.window_min - 4.0).abs() < 1e-12);
    }
}
