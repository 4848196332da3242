//! Distances between marked point configurations, Poisson sampling and the
//! approximation bounds.
use cbe::point_process::{
    dist_config, intensity_change_bound, pp_bound, sample_poisson, wrapped_gaussian_tv, FiniteIntensity, MarkedPoint, PpMoments,
};
use cbe::{Complex64, RngStream};

fn point(s: &mut RngStream) -> MarkedPoint {
    MarkedPoint::new(s.angle(), s.exp1(), vec![Complex64::cis(s.angle())])
}

fn main() -> cbe::Result<()> {
    let p = FiniteIntensity { total_mass: 5.0, sampler: Box::new(point) };
    let mut s = RngStream::new(1, 0);
    let x = sample_poisson(&p, &mut s);
    let y = sample_poisson(&p, &mut s);
    let (d0, d1) = dist_config(&x, &y)?;
    println!("{} vs {} points: bottleneck {d0:.4}, mean-cost {d1:.4}", x.len(), y.len());

    let m = [PpMoments { ep: 0.01, et: 0.02, etp: 1e-3, l: 1.0 }; 10];
    println!("Poisson approximation bound: {:.4e}", pp_bound(&m, 0.5, 1.0, 1.0)?);
    println!("{:?}", intensity_change_bound(0.05, 5.0, 5.5)?);

    for v in [0.05, 0.1, 0.2] {
        let e = wrapped_gaussian_tv(v, 0.0, 200_000, 64, &mut s)?;
        println!("V {v}: TV {:.3e} +- {:.1e} (shape {:.3e})", e.tv, e.se, e.bound_shape);
    }
    Ok(())
}
