//! Quartic wave-packet moments from forward/backward trajectory pairs,
//! compared with Crank–Nicolson. Reduced trajectory count; the CLI config
//! `configs/quartic_moments.ini` runs the full-size experiment.

use stochastic_quartic::observables::estimate_moments;
use stochastic_quartic::reference::{cn_observe, grid_moment, init_packet, CnOptions, Grid};
use stochastic_quartic::{GaussianPacket, ModelParams, MonteCarlo, Which};

fn main() -> stochastic_quartic::Result<()> {
    let params = ModelParams::new(10.0, 1.0, 0.2);
    let packet = GaussianPacket::new(0.5, 0.5, 1.0)?;
    let times: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    let obs = [(0, Which::Position), (1, Which::Position), (2, Which::Position)];
    let mc = MonteCarlo { n_traj: 4000, seed: 2024, dt: 1e-4 };
    let est = estimate_moments(&params, &packet, &obs, &times, &mc)?;

    let grid = Grid::symmetric(8.0, 2e-3, 1e-3)?;
    let mut reference = Vec::new();
    cn_observe(&init_packet(&packet, &grid)?, &grid, &params, &times, &CnOptions::default(), |s| {
        reference.push((grid_moment(s, &grid, 1, Which::Position, 1.0)?, grid_moment(s, &grid, 2, Which::Position, 1.0)?));
        Ok(())
    })?;

    println!("{:>5} {:>8} {:>10} {:>10} {:>6} {:>10} {:>10} {:>6}", "t", "n0", "<x>", "grid", "z", "<x^2>", "grid", "z");
    for (j, &(x1, x2)) in reference.iter().enumerate() {
        let (n0, a, b) = (&est[0][j], &est[1][j], &est[2][j]);
        println!(
            "{:5.2} {:8.4} {:10.5} {:10.5} {:6.2} {:10.5} {:10.5} {:6.2}",
            a.t,
            n0.value,
            a.value,
            x1,
            z(a.value, x1, a.std_error),
            b.value,
            x2,
            z(b.value, x2, b.std_error)
        );
    }
    Ok(())
}

/// Deviation in standard errors; zero spread (t = 0) reports 0.
fn z(value: f64, reference: f64, se: f64) -> f64 {
    if se > 0.0 { (value - reference) / se } else { 0.0 }
}
