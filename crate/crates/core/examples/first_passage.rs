//! First time Re γ reaches zero, for a sweep of couplings and for the
//! driven schedule ω²(t) = sin²t, λ(t) = λ₀ sin²t.

use stochastic_quartic::disentangle::first_passage_statistics;
use stochastic_quartic::{ModelParams, Schedule};

fn main() -> stochastic_quartic::Result<()> {
    let dt = 2.0 / std::f64::consts::PI * 1e-3;
    let n_traj = 1000;
    println!("{:>6} {:>10} {:>10} {:>9}", "lambda", "mean", "std", "censored");
    for lam in [0.1, 0.2, 0.4, 0.8] {
        let params = ModelParams::new(10.0, 1.0, lam);
        let s = first_passage_statistics(&params, 1.0, dt, 2000.0, n_traj, 1)?;
        println!("{lam:6.2} {:10.3} {:10.3} {:9}", s.mean, s.std_dev, s.n_censored);
    }
    let driven = ModelParams::new(10.0, 1.0, 0.0).with_schedules(Schedule::SinSquared(1.0), Schedule::SinSquared(0.2));
    let s = first_passage_statistics(&driven, 1.0, dt, 2000.0, n_traj, 1)?;
    println!("driven: mean {:.3}, std {:.3}", s.mean, s.std_dev);
    Ok(())
}
