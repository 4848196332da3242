//! Limit densities, samplers and goodness of fit.
use cbe::limits::{density_table, fhk_cdf, fit_gumbel_location, gof, sample_fhk, sample_gumbel, LimitLaw};
use cbe::RngStream;

fn main() -> cbe::Result<()> {
    for r in density_table(-2.0, 4.0, 7)? {
        println!("{r:?}");
    }
    println!("F(0) = {:.6}", fhk_cdf(0.0));

    let mut s = RngStream::new(1, 0);
    let x: Vec<f64> = (0..5000).map(|_| sample_fhk(&mut s)).collect();
    let g = gof(&x, &LimitLaw::Fhk, 99, &mut s)?;
    println!("FHK sample vs FHK: KS {:.4}, bootstrap p {:.2}", g.ks, g.ks_pvalue);

    let y: Vec<f64> = (0..5000).map(|_| sample_gumbel(1.0, &mut s).map(|v| v + 0.7)).collect::<cbe::Result<_>>()?;
    println!("fitted Gumbel location {:.4} (true 0.7)", fit_gumbel_location(&y, 1.0)?);
    Ok(())
}
