//! Certified maximum of the log-modulus field and its extremal process.
use cbe::extremes::{arc_decomposition, centering, extract_extremal_process, global_max, Statistic};
use cbe::opuc::{run_field_with, CheckpointSchedule, Mesh};
use cbe::rng::verblunsky_sequence;
use cbe::{RngStream, Sigma};

fn main() -> cbe::Result<()> {
    let n = 1024;
    let g = verblunsky_sequence(&mut RngStream::new(3, 0), n, 2.0)?;

    let m = 4;
    let t = run_field_with(&g, &Mesh::uniform(n, 2 * m * n)?, Sigma::Real, 2.0, &CheckpointSchedule::None, false)?;
    let b = global_max(&t, m)?;
    let c = centering(n, 2.0, Statistic::Field)?;
    println!("max phi_n in [{:.4}, {:.4}], centered {:.4}", b.value, b.upper, b.value - c.shift());

    let k1 = 64;
    let arcs = arc_decomposition(n, k1)?;
    let t = run_field_with(&g, &Mesh::arcs(n, k1, 4)?, Sigma::Real, 2.0, &CheckpointSchedule::None, false)?;
    let mut ex = extract_extremal_process(&t, &arcs, &c)?;
    ex.sort_by(|a, b| b.w_hat.total_cmp(&a.w_hat));
    for e in ex.iter().take(5) {
        println!("arc {:>3}  theta_j {:.4}  w_hat {:+.4}", e.j, e.theta_j, e.w_hat);
    }
    Ok(())
}
