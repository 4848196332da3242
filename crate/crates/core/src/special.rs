//! Special functions and quadrature used across the crate.

use num_complex::Complex64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Real log-Gamma.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[inline]
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal branch of log Γ(z) for complex z (Lanczos, g = 7), continuous
/// in the right half-plane.
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // reflection: Γ(z)Γ(1−z) = π / sin(πz)
        let s = (Complex64::from(PI) * z).sin();
        return Complex64::from(PI.ln()) - s.ln() - ln_gamma_complex(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::from(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Complex64::from(0.5 * (2.0 * PI).ln()) + (z + 0.5) * t.ln() - t + x.ln()
}

/// ln(1 + w) for complex w, accurate for small |w|.
pub fn ln_1p_complex(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    Complex64::new(re, w.im.atan2(1.0 + w.re))
}

const STIRLING_B: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

fn stirling_tail(z: Complex64) -> Complex64 {
    let zi = z.inv();
    let z2 = zi * zi;
    let mut p = zi;
    let mut s = Complex64::new(0.0, 0.0);
    for c in STIRLING_B {
        s += p * c;
        p *= z2;
    }
    s
}

/// ln Γ(x + a) − ln Γ(x) without the cancellation of two large log-Gammas.
/// Needs Re x > 0 and Re(x + a) > 0.
pub fn ln_gamma_ratio_complex(x: Complex64, a: Complex64) -> Complex64 {
    let mut x = x;
    let mut shift = Complex64::new(0.0, 0.0);
    while x.re < 20.0 || (x + a).re < 20.0 {
        shift -= ln_1p_complex(a / x);
        x += 1.0;
    }
    let y = x + a;
    // (x + a − 1/2) ln(x + a) − (x − 1/2) ln x − a
    let main = (x - 0.5) * ln_1p_complex(a / x) + a * y.ln() - a;
    main + stirling_tail(y) - stirling_tail(x) + shift
}

/// log sinh(x) for x ≥ 0 without overflow.
#[inline]
pub fn log_sinh(x: f64) -> f64 {
    if x < 1e-8 {
        x.ln() + x * x / 6.0
    } else if x < 20.0 {
        x.sinh().ln()
    } else {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// e^z K₀(z) by trapezoidal quadrature of ∫₀^∞ e^{−z(cosh t − 1)} dt.
///
/// The integrand is entire and even in t, so the trapezoid rule converges
/// geometrically; the step is halved until the relative change drops below
/// `1e-13`.
pub fn bessel_k0_scaled(z: f64) -> f64 {
    assert!(z > 0.0, "K0 needs z > 0");
    let f = |t: f64| (-z * (t.cosh() - 1.0)).exp();
    // cosh t − 1 ≥ 40/z makes the tail below e^{-40}
    let t_max = (1.0 + 40.0 / z).acosh() + 1.0;
    let mut h = 0.5_f64.min(t_max / 4.0);
    let trap = |h: f64| {
        let mut s = 0.5 * f(0.0);
        let mut t = h;
        while t <= t_max {
            s += f(t);
            t += h;
        }
        s * h
    };
    let mut prev = trap(h);
    for _ in 0..20 {
        h *= 0.5;
        let cur = trap(h);
        if (cur - prev).abs() <= 1e-13 * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

pub fn bessel_k0(z: f64) -> f64 {
    bessel_k0_scaled(z) * (-z).exp()
}

/// Small-argument series K₀(z) = −(ln(z/2)+γ)I₀(z) + Σ (z²/4)^k H_k / (k!)².
pub fn bessel_k0_series(z: f64) -> f64 {
    let q = z * z / 4.0;
    let lead = -((z / 2.0).ln() + EULER_GAMMA);
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut rest = 0.0;
    let mut h = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        h += 1.0 / kf;
        i0 += term;
        rest += term * h;
        if term < 1e-18 * i0 {
            break;
        }
    }
    lead * i0 + rest
}

/// Large-argument asymptotic series sqrt(π/2z) e^{−z} Σ a_k, truncated at
/// its smallest term.
pub fn bessel_k0_asymptotic(z: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (-(odd * odd)) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
    }
    (PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval. Returns
/// the integral and an error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    let mut err = 0.0;
    while let Some((lo, hi, tol_here, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if e <= tol_here.max(4.0 * f64::EPSILON * v.abs()) || depth >= 40 || (hi - lo).abs() < 1e-14 * (1.0 + lo.abs()) {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol_here, depth + 1));
            stack.push((mid, hi, 0.5 * tol_here, depth + 1));
        }
    }
    (total, err)
}

/// ∫_a^∞ f by the substitution x = a + t/(1−t).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> (f64, f64) {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = 1.0 - t;
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Golden-section maximisation of a unimodal function on [a, b].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
