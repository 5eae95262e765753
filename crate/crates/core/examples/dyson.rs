//! Dyson partial sums in a truncated oscillator basis: the residual after
//! order n scales as λ^(n+1).

use stochastic_quartic::perturbation::{dyson_partial_sum, residual_scaling};
use stochastic_quartic::ModelParams;

fn main() -> stochastic_quartic::Result<()> {
    let lambdas = [0.0125, 0.025, 0.05, 0.1, 0.2];
    let (dim, t, sector) = (64, 0.5, 1);
    println!("{:>8} {:>12} {:>12} {:>12}", "lambda", "order 0", "order 1", "order 2");
    for &lam in &lambdas {
        let p = ModelParams::new(1.0, 1.0, lam);
        let r: Vec<f64> = (0..3)
            .map(|o| dyson_partial_sum(&p, dim, t, o, sector).map(|d| d.residual_norm))
            .collect::<Result<_, _>>()?;
        println!("{lam:8.4} {:12.4e} {:12.4e} {:12.4e}", r[0], r[1], r[2]);
    }
    let p = ModelParams::new(1.0, 1.0, 0.1);
    for order in 0..3 {
        println!("order {order}: slope {:.3}", residual_scaling(&p, dim, t, &lambdas, order, sector)?);
    }
    Ok(())
}
