//! Noiseless limit: with λ = 0 the stochastic pipeline is deterministic and
//! must reproduce the closed-form harmonic moments.

use stochastic_quartic::observables::{estimate_moments, harmonic_moment};
use stochastic_quartic::{GaussianPacket, ModelParams, MonteCarlo, Which};

fn main() -> stochastic_quartic::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 0.0);
    let packet = GaussianPacket::new(1.0, 1.0, 0.0)?;
    let mc = MonteCarlo { n_traj: 2, seed: 0, dt: 1e-4 };
    let times: Vec<f64> = (0..=8).map(|i| i as f64 * std::f64::consts::PI / 4.0).collect();
    let obs = [(1, Which::Position), (2, Which::Position), (2, Which::Momentum)];
    let est = estimate_moments(&params, &packet, &obs, &times, &mc)?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "t", "<x>", "exact", "<x^2>", "exact");
    for (j, e) in est[0].iter().enumerate() {
        let x2 = &est[1][j];
        println!(
            "{:8.4} {:12.8} {:12.8} {:12.8} {:12.8}",
            e.t,
            e.value,
            harmonic_moment(1, Which::Position, e.t, &packet, &params)?,
            x2.value,
            harmonic_moment(2, Which::Position, e.t, &packet, &params)?,
        );
    }
    let p2 = est[2].last().unwrap();
    println!("<p^2>(2π) = {:.8} (std error {:e})", p2.value, p2.std_error);
    Ok(())
}
