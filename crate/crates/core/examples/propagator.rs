//! Position propagator three ways: Monte Carlo over ξ trajectories, the
//! semiclassical branch sum, and the grid solver.

use stochastic_quartic::observables::estimate_propagator;
use stochastic_quartic::reference::{cn_propagator, Grid};
use stochastic_quartic::semiclassical::semiclassical_propagator;
use stochastic_quartic::{ModelParams, MonteCarlo};

fn main() -> stochastic_quartic::Result<()> {
    let params = ModelParams::new(10.0, 1.0, 0.2);
    let (x_i, x_f, t) = (0.0, 0.5, 0.5);
    let mc = MonteCarlo { n_traj: 20_000, seed: 3, dt: 1e-3 };
    let g_mc = estimate_propagator(&params, x_i, x_f, t, &mc)?;
    let g_sc = semiclassical_propagator(&params, x_i, x_f, t, 1)?;
    let grid = Grid::symmetric(8.0, 2e-3, 1e-3)?;
    let g_cn = cn_propagator(&params, x_i, x_f, t, &grid, (0.03, 0.02))?;

    println!("Monte Carlo   {:.5} ± ({:.1e}, {:.1e})", g_mc.value, g_mc.std_error_re, g_mc.std_error_im);
    println!("semiclassical {:.5}", g_sc);
    println!("grid          {:.5}", g_cn);
    println!("|G_sc - G_cn| / |G_cn| = {:.2e}", (g_sc - g_cn).norm() / g_cn.norm());
    Ok(())
}
