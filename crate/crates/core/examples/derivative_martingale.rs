//! B_k and its proper-martingale companion at dyadic levels.
use cbe::martingale::{dyadic_fields, normalizer_sums, snapshot, truncation_mass};
use cbe::{RngStream, Sigma};

fn main() -> cbe::Result<()> {
    let beta = 2.0;
    let fields = dyadic_fields(&mut RngStream::new(5, 0), 4..=12, 8, beta, Sigma::Real)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "k", "B_k", "B_hat_k", "excluded");
    for (k, phi) in &fields {
        let s = snapshot(phi, *k, beta, Sigma::Real, true)?;
        let ex = truncation_mass(phi, *k, beta, 0.05)?;
        println!("{k:>6} {:>10.5} {:>10.5} {:>10.2e}", s.mass, s.proper_mass, ex);
    }
    let ns = normalizer_sums(1 << 12, beta, Sigma::Real)?;
    println!("{ns:?}");
    Ok(())
}
