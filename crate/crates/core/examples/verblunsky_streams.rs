//! Reproducible Verblunsky coefficients: one stream per (seed, replica).
use cbe::rng::{beta_k_sq, verblunsky_sequence};
use cbe::RngStream;

fn main() -> cbe::Result<()> {
    let beta = 2.0;
    let a = verblunsky_sequence(&mut RngStream::new(7, 0), 8, beta)?;
    let b = verblunsky_sequence(&mut RngStream::new(7, 0), 8, beta)?;
    assert_eq!(a, b);
    for (k, g) in a.iter().enumerate() {
        println!("gamma_{k} = {:+.4} {:+.4}i   |gamma|^2 mean {:.4}", g.re, g.im, 1.0 / (1.0 + beta_k_sq(k, beta)));
    }

    // a replica can be regenerated in isolation
    let r = 12_345u64;
    let g = verblunsky_sequence(&mut RngStream::new(7, r), 4, beta)?;
    println!("replica {r}: {:?}", g.iter().map(|z| z.norm()).collect::<Vec<_>>());
    Ok(())
}
