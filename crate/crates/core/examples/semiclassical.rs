//! Classical paths, their Gelfand–Yaglom fluctuation factors and the
//! finite-dimensional determinant check.

use stochastic_quartic::semiclassical::{
    classical_action, classical_trajectory, discrete_determinant_ratio, find_branches, gelfand_yaglom,
    semiclassical_propagator, ShootingOptions,
};
use stochastic_quartic::ModelParams;

fn main() -> stochastic_quartic::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 0.2);
    let (x_i, x_f, t) = (0.0, 0.5, 1.0);
    let path = classical_trajectory(&params, x_i, x_f, t, 200, 0)?;
    let det = gelfand_yaglom(&path, &params)?;
    println!("initial velocity {:.10}", path.initial_velocity);
    println!("action {:.10} (Simpson {:.10})", path.action, classical_action(&path, &params)?);
    println!("energy drift {:.2e}", path.energy_drift(&params));
    println!("F(t) = {:.8}, f(t) = {:.8}", det.big_f, det.small_f);
    for n in [16, 32, 64, 128] {
        println!("  discrete det ratio, {n:3} nodes: {:.6} (F/f = {:.6})", discrete_determinant_ratio(&path, &params, n)?, det.big_f / det.small_f);
    }

    // Returning to the origin: the particle at rest plus faster round trips.
    let opts = ShootingOptions { v_max: Some(40.0), n_scan: 801, ..ShootingOptions::default() };
    let v0 = find_branches(&params, 0.0, 0.0, 4.0, &opts)?;
    println!("paths 0 -> 0 in t = 4: initial velocities {v0:.4?}");
    println!("G(0.5, 1 | 0, 0) = {:.6}", semiclassical_propagator(&params, x_i, x_f, t, 1)?);
    Ok(())
}
