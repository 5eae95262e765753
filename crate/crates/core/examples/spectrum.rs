//! Low-lying quartic levels by diagonalization in a self-consistent
//! oscillator basis.

use stochastic_quartic::reference::{natural_basis_frequency, spectrum};
use stochastic_quartic::ModelParams;

fn main() -> stochastic_quartic::Result<()> {
    for lam in [0.0, 0.2, 1.0, 10.0] {
        let p = ModelParams::new(1.0, 1.0, lam);
        let levels = spectrum(&p, 64)?;
        let shown: Vec<String> = levels.iter().take(5).map(|e| format!("{e:.8}")).collect();
        println!("lambda {lam:5.1} (basis w {:.4}): {}", natural_basis_frequency(&p)?, shown.join("  "));
    }
    Ok(())
}
