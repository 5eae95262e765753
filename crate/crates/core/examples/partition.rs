//! Partition function: bare classical integral, its ħ² correction, and the
//! spectral sum, as ħ shrinks.

use stochastic_quartic::reference::partition_spectral;
use stochastic_quartic::semiclassical::{partition_classical, partition_semiclassical};
use stochastic_quartic::ModelParams;

fn main() -> stochastic_quartic::Result<()> {
    let beta = 0.5;
    println!("{:>6} {:>14} {:>12} {:>12}", "hbar", "Z_spectral", "err_cl", "err_semi");
    for hbar in [0.4, 0.2, 0.1] {
        let p = ModelParams::new(1.0, 1.0, 0.2).with_hbar(hbar);
        let zs = partition_spectral(&p, beta, 1e-12)?;
        let zc = partition_classical(&p, beta, 12.0, 4000)?;
        let zq = partition_semiclassical(&p, beta, 12.0, 4000)?;
        println!("{hbar:6.3} {zs:14.8} {:12.3e} {:12.3e}", (zc - zs).abs(), (zq - zs).abs());
    }
    Ok(())
}
