//! Bessel-3 bridge density, sampler and Brownian-bridge positivity.
use cbe::barriers::{bridge_positive_mc, bridge_positive_prob, sample_bessel_bridge, uniform_grid, BarrierKind, BarrierSpec, BesselBridgeSpec};
use cbe::RngStream;

fn main() -> cbe::Result<()> {
    let spec = BesselBridgeSpec::new(0.0, 4.0, 1.0, 2.0, 0.0)?;
    println!("mass at t = 2: {:.12}", spec.total_mass(2.0)?);
    for x in [0.5, 1.0, 2.0, 3.0] {
        println!("P(y_2 <= {x}) = {:.5}", spec.cdf(2.0, x)?);
    }

    let grid = uniform_grid(0.0, 4.0, 4000);
    let mut s = RngStream::new(1, 0);
    let mid: Vec<f64> = (0..2000).map(|_| sample_bessel_bridge(&spec, &mut s, &grid).map(|p| p[2000])).collect::<cbe::Result<_>>()?;
    let below = mid.iter().filter(|&&y| y <= 2.0).count() as f64 / mid.len() as f64;
    println!("empirical P(y_2 <= 2) = {below:.4}");

    let e = bridge_positive_mc(1.0, 2.0, 4.0, 100, 20_000, &mut RngStream::new(2, 0))?;
    println!("positivity: formula {:.4}, Monte Carlo {:.4} +- {:.4}", bridge_positive_prob(1.0, 2.0, 4.0)?, e.estimate, e.se);

    let b = BarrierSpec::new(1 << 20, BarrierKind::UpperAll)?;
    println!("upper barrier at k = 5000: {:.4}", b.value(5000.0)?);
    Ok(())
}
