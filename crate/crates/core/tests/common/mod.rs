//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical kernels.
#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;

/// Roots of Σ c_k z^k (lowest degree first) by Durand–Kerner iteration.
pub fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    z
}

/// Heap's algorithm over all permutations of 0..n.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// (min over π of max_i cost[i][π(i)], min over π of mean_i cost[i][π(i)]).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (f64, f64) {
    let n = cost.len();
    let (mut bott, mut avg) = (f64::INFINITY, f64::INFINITY);
    for_each_permutation(n, |p| {
        let mx = (0..n).map(|i| cost[i][p[i]]).fold(0.0, f64::max);
        let s: f64 = (0..n).map(|i| cost[i][p[i]]).sum();
        bott = bott.min(mx);
        avg = avg.min(s / n as f64);
    });
    (bott, avg)
}

/// K₁(z) = ∫₀^∞ e^{−z cosh t} cosh t dt by the trapezoid rule, which
/// converges geometrically for this integrand.
pub fn bessel_k1(z: f64) -> f64 {
    let h: f64 = 1e-2;
    let mut s = 0.5 * (-z).exp();
    let mut t = h;
    loop {
        let v = (-z * t.cosh()).exp() * t.cosh();
        s += v;
        if v < 1e-300 || z * t.cosh() > 745.0 {
            break;
        }
        t += h;
    }
    s * h
}

/// CDF of (G₁ + G₂)/2 for independent standard max-Gumbels:
/// F(x) = a K₁(a) with a = 2e^{−x}.
pub fn half_two_gumbel_cdf(x: f64) -> f64 {
    let a = 2.0 * (-x).exp();
    if a > 700.0 {
        return 0.0;
    }
    if a < 1e-8 {
        return 1.0;
    }
    a * bessel_k1(a)
}

pub fn gumbel_cdf(x: f64, scale: f64) -> f64 {
    (-(-x / scale).exp()).exp()
}

/// Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_two(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Two-sample KS critical value at level 5%.
pub fn ks_two_crit_5pct(n: usize, m: usize) -> f64 {
    1.358 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn se(x: &[f64]) -> f64 {
    (var(x) / x.len() as f64).sqrt()
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    let mut p = (-lambda).exp();
    for i in 1..=k {
        p *= lambda / i as f64;
    }
    p
}

/// Upper 1% point of χ² with `dof` degrees of freedom (Wilson–Hilferty).
pub fn chi2_crit_1pct(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 2.326_347_874;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

/// CβE(β = 2, n = 2) gap CDF on [0, 2π): (Δ − sin Δ)/2π.
pub fn cue2_gap_cdf(d: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else if d >= 2.0 * PI {
        1.0
    } else {
        (d - d.sin()) / (2.0 * PI)
    }
}

/// log Γ(x) by the Stirling series after upward recurrence to x ≥ 20.
pub fn ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut y = x;
    while y < 20.0 {
        shift -= y.ln();
        y += 1.0;
    }
    let y2 = y * y;
    shift + (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * y) - 1.0 / (360.0 * y * y2) + 1.0 / (1260.0 * y2 * y2 * y)
        - 1.0 / (1680.0 * y2 * y2 * y2 * y)
}
