//! Decoration diffusions: a coupled run, decoration samples and the
//! one-ray probability fit.
use cbe::decoration::{one_ray_fit, sample_decoration, simulate_coupled, DecorationLaw, SdeConfig};
use cbe::{Complex64, RngStream, Sigma};

fn main() -> cbe::Result<()> {
    let c = SdeConfig::ray(2.0, 1e3, Sigma::Real)?.with_theta(vec![0.0, -1.0, -10.0]).with_steps(500);
    let p = simulate_coupled(&c, &[Complex64::new(0.0, 0.0); 3], &mut RngStream::new(1, 0))?;
    println!("T- {:.3}  T+ {:.3}  U_T+ = {:.4?}", c.t_minus, c.t_plus, p.terminal_u());

    let c = SdeConfig::new(2.0, 20.0, Sigma::Imaginary)?.with_k45(2.0, 1.0).with_steps(300);
    let d = sample_decoration(&c, &mut RngStream::new(2, 0), 200, DecorationLaw::S, false)?;
    // barrier dropped: every lattice point contributes
    let mass: Vec<f64> = d.iter().map(|x| x.decoration.values.iter().map(|v| v.norm()).sum()).collect();
    let mean = mass.iter().sum::<f64>() / mass.len() as f64;
    println!("{} decorations on {} lattice points, mean total mass {mean:.3e}", d.len(), c.theta.len());

    let k1 = 1e12f64;
    let l = k1.ln();
    let hs: Vec<f64> = (0..6).map(|i| l.powf(0.2) + (l.powf(0.6) - l.powf(0.2)) * i as f64 / 5.0).collect();
    let fit = one_ray_fit(&SdeConfig::ray(2.0, k1, Sigma::Real)?, &hs, 4.0, 2000, &mut RngStream::new(3, 0))?;
    for e in &fit.points {
        println!("h {:.3}  P {:.3e} +- {:.1e}", e.h, e.probability, e.se);
    }
    println!("slope {:.3} (R2 {:.3})", fit.slope, fit.r2);
    Ok(())
}
