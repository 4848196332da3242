//! Fast coefficient-domain path for σ = 1.
//!
//! A run of Szegő steps k = a..b acts on (Φ_a, Φ*_a) by a 2×2 matrix of
//! polynomials of the form [[A, B], [B*, A*]], where * reverses and
//! conjugates coefficients at degree b − a. Only A and B are stored, blocks
//! are merged in a balanced product tree with FFT multiplication, and the
//! field 2 log|Φ*_k| is then read off at roots of unity with one more FFT.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::polymath::{circle_max, Convolver};

#[derive(Clone, Debug)]
struct Block {
    len: usize,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

fn star(p: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); len + 1];
    for (d, c) in p.iter().enumerate() {
        if d <= len {
            out[len - d] = c.conj();
        }
    }
    out
}

fn pad(mut v: Vec<Complex64>, len: usize) -> Vec<Complex64> {
    v.resize(len, Complex64::new(0.0, 0.0));
    v
}

const LEAF: usize = 32;

fn szego_step(top: &mut [Complex64], bot: &mut [Complex64], k: usize, g: Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let gc = g.conj();
    for d in (0..=k + 1).rev() {
        let zt = if d > 0 { top[d - 1] } else { zero };
        let nt = zt - gc * bot[d];
        bot[d] -= g * zt;
        top[d] = nt;
    }
}

fn leaf(gammas: &[Complex64]) -> Block {
    let l = gammas.len();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // M(1, 0) = (A, B*) and M(0, 1) = (B, A*)
    let mut a = vec![zero; l + 1];
    let mut b_star = vec![zero; l + 1];
    let mut b = vec![zero; l + 1];
    let mut a_star = vec![zero; l + 1];
    a[0] = one;
    a_star[0] = one;
    for (k, g) in gammas.iter().enumerate() {
        szego_step(&mut a, &mut b_star, k, *g);
        szego_step(&mut b, &mut a_star, k, *g);
    }
    Block { len: l, a, b }
}

fn merge(conv: &mut Convolver, first: &Block, second: &Block) -> Block {
    let len = first.len + second.len;
    let a1s = star(&first.a, first.len);
    let b1s = star(&first.b, first.len);
    let a = conv.mul_sum(&[(&second.a, &first.a), (&second.b, &b1s)]);
    let b = conv.mul_sum(&[(&second.a, &first.b), (&second.b, &a1s)]);
    Block {
        len,
        a: pad(a, len + 1),
        b: pad(b, len + 1),
    }
}

fn build(conv: &mut Convolver, gammas: &[Complex64]) -> Block {
    if gammas.len() <= LEAF {
        return leaf(gammas);
    }
    let mid = gammas.len() / 2;
    let left = build(conv, &gammas[..mid]);
    let right = build(conv, &gammas[mid..]);
    merge(conv, &left, &right)
}

/// Coefficients of (Φ_n, Φ*_n) for n = gammas.len(), by product tree.
pub fn szego_fast(gammas: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut conv = Convolver::new();
    let n = gammas.len();
    if n == 0 {
        let one = vec![Complex64::new(1.0, 0.0)];
        return (one.clone(), one);
    }
    let blk = build(&mut conv, gammas);
    // (Φ_n, Φ*_n) = M (1, 1): Φ_n = A + B
    let phi: Vec<Complex64> = blk.a.iter().zip(&blk.b).map(|(x, y)| x + y).collect();
    let st = star(&phi, n);
    (phi, st)
}

/// Φ*_k coefficients at each checkpoint k (ascending, each ≤ gammas.len()),
/// advancing segment by segment.
pub fn szego_prefixes(gammas: &[Complex64], checkpoints: &[usize]) -> Vec<(usize, Vec<Complex64>)> {
    let mut conv = Convolver::new();
    let mut ks: Vec<usize> = checkpoints.iter().copied().filter(|&k| k <= gammas.len()).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut phi = vec![Complex64::new(1.0, 0.0)];
    let mut cur = 0;
    let mut out = Vec::with_capacity(ks.len());
    for k in ks {
        if k > cur {
            let blk = build(&mut conv, &gammas[cur..k]);
            let phistar = star(&phi, cur);
            let next = conv.mul_sum(&[(&blk.a, &phi), (&blk.b, &phistar)]);
            phi = pad(next, k + 1);
            cur = k;
        }
        out.push((k, star(&phi, cur)));
    }
    out
}

/// φ_k = log|Φ*_k|² at the M equally spaced angles 2πj/M.
pub fn field_on_roots(phistar: &[Complex64], m: usize) -> Vec<f64> {
    Convolver::new()
        .eval_roots(phistar, m)
        .into_iter()
        .map(|v| v.norm_sqr().ln())
        .collect()
}

/// Global maximum of φ = log|Φ*|² over the circle: mesh at `m` roots of
/// unity, golden-section polish of the best local maxima. Returns
/// (θ*, max φ, mesh max φ).
pub fn field_max(phistar: &[Complex64], m: usize) -> (f64, f64, f64) {
    let vals = field_on_roots(phistar, m);
    let mesh_max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f = |t: f64| crate::opuc::horner(phistar, Complex64::cis(t)).norm_sqr().ln();
    let (t, v) = circle_max(f, &vals, 4);
    (t.rem_euclid(TAU), v.max(mesh_max), mesh_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opuc::{szego_coefficients, DEFAULT_ORACLE_CAP};
    use crate::rng::{verblunsky_sequence, RngStream};

    #[test]
    fn product_tree_matches_recurrence() {
        let mut s = RngStream::new(11, 2);
        let g = verblunsky_sequence(&mut s, 300, 2.0).unwrap();
        let (p, st) = szego_coefficients(&g, 300, DEFAULT_ORACLE_CAP).unwrap();
        let (pf, sf) = szego_fast(&g);
        let scale = st.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for d in 0..=300 {
            assert!((p[d] - pf[d]).norm() < 1e-10 * scale);
            assert!((st[d] - sf[d]).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn prefixes_match_recurrence() {
        let mut s = RngStream::new(3, 9);
        let g = verblunsky_sequence(&mut s, 200, 1.0).unwrap();
        for (k, st) in szego_prefixes(&g, &[1, 2, 64, 128, 200]) {
            let (_, want) = szego_coefficients(&g, k, DEFAULT_ORACLE_CAP).unwrap();
            for d in 0..=k {
                assert!((st[d] - want[d]).norm() < 1e-10 * (1.0 + want[d].norm()), "k={k}");
            }
        }
    }
}
