//! Fejér sums, Bernstein ratios and interpolation brackets.
use cbe::polymath::{bernstein_ratio, fejer_kernel_angle, fejer_sum_identity, interpolation_brackets, CirclePoly};
use cbe::{Complex64, RngStream};

fn main() -> cbe::Result<()> {
    println!("F_8(0) = {}, F_8(0.3) = {:.6}", fejer_kernel_angle(8, 0.0), fejer_kernel_angle(8, 0.3));
    println!("Fejer sum residual (m 8, r 3): {:.1e}", fejer_sum_identity(8, 3, 0.123));

    let mut s = RngStream::new(4, 0);
    let q = CirclePoly::new((0..=32).map(|_| Complex64::new(s.normal(), s.normal())).collect());
    println!("Bernstein ratio {:.6}", bernstein_ratio(&q)?.ratio);
    for m in [2, 4, 8] {
        let b = interpolation_brackets(&q, m, 4.0)?;
        println!("m {m}: roots max {:.3} <= circle max {:.3} <= {:.3}", b.roots_max, b.circle_max, b.certified_upper);
    }
    let roots = q.roots()?;
    println!("{} roots, largest modulus {:.4}", roots.len(), roots.iter().map(|z| z.norm()).fold(0.0, f64::max));
    Ok(())
}
