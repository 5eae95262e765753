//! Commuting limit (kinetic term dropped): the exact Gaussian law of the
//! rotated Wiener variable against a potential-only grid evolution.

use stochastic_quartic::observables::estimate_commuting_moments;
use stochastic_quartic::reference::{cn_observe, grid_moment, init_packet, CnOptions, Grid};
use stochastic_quartic::{GaussianPacket, ModelParams, Which};

fn main() -> stochastic_quartic::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 0.2);
    let packet = GaussianPacket::new(0.5, 0.5, 1.0)?;
    let times: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let obs = [(1, Which::Momentum), (2, Which::Momentum)];
    let est = estimate_commuting_moments(&params, &packet, &obs, &times, 200_000, 7)?;

    let grid = Grid::symmetric(6.0, 1e-3, 1e-3)?;
    let opts = CnOptions { kinetic: false, ..CnOptions::default() };
    let mut reference = Vec::new();
    cn_observe(&init_packet(&packet, &grid)?, &grid, &params, &times, &opts, |s| {
        reference.push((grid_moment(s, &grid, 1, Which::Momentum, 1.0)?, grid_moment(s, &grid, 2, Which::Momentum, 1.0)?));
        Ok(())
    })?;

    println!("{:>5} {:>10} {:>10} {:>6} {:>10} {:>10} {:>6}", "t", "<p>", "grid", "z", "<p^2>", "grid", "z");
    for (j, &(p1, p2)) in reference.iter().enumerate() {
        let (a, b) = (&est[0][j], &est[1][j]);
        println!(
            "{:5.2} {:10.5} {:10.5} {:6.2} {:10.5} {:10.5} {:6.2}",
            a.t,
            a.value,
            p1,
            (a.value - p1) / a.std_error,
            b.value,
            p2,
            (b.value - p2) / b.std_error
        );
    }
    Ok(())
}
