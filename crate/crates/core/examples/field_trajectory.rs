//! Run the field recursion on a mesh, then read off the characteristic
//! polynomial, its zeros and the counting function.
use cbe::opuc::{counting_function_on, eigenangles, run_field_with, CheckpointSchedule, Mesh};
use cbe::rng::verblunsky_sequence;
use cbe::{Complex64, RngStream, Sigma};

fn main() -> cbe::Result<()> {
    let n = 8;
    let mut s = RngStream::new(1, 0);
    let gammas = verblunsky_sequence(&mut s, n - 1, 2.0)?;
    let alpha = Complex64::cis(s.angle());

    let mesh = Mesh::uniform(n, 64 * n)?;
    let traj = run_field_with(&gammas, &mesh, Sigma::Real, 2.0, &CheckpointSchedule::Dyadic, false)?;
    let i = traj.argmax_phi();
    println!("after {} steps: max phi = {:.4} at theta = {:.4}", traj.k, traj.phi[i], traj.theta[i]);
    println!("|X_n(1)|^2 = {:.4}", traj.char_poly_at(0, alpha).norm_sqr());

    let zeros = eigenangles(&gammas, alpha);
    println!("eigenangles: {zeros:.4?}");
    let count = counting_function_on(&traj, alpha)?;
    println!("N(2pi-) / 2pi = {}", count.last().unwrap() / std::f64::consts::TAU);
    println!("snapshots at k = {:?}", traj.snapshots.keys().collect::<Vec<_>>());
    Ok(())
}
