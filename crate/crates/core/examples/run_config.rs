//! Drives the experiment runner from an in-memory config, as the `quartic`
//! binary does from a file.

use stochastic_quartic::cli::{run, ExperimentConfig, RunOptions};

const CONFIG: &str = "\
[experiment]
kind = partition
seed = 1

[model]
mass = 1
omega = 1
lambda = 0.2

[partition]
betas = 0.25, 0.5, 1.0, 2.0
hbars = 0.2
x_cutoff = 16
";

fn main() -> stochastic_quartic::Result<()> {
    let config = ExperimentConfig::parse(CONFIG)?;
    print!("{}", config.summary());
    let out = std::env::temp_dir().join("quartic-run-config-example");
    let report = run(&config, &RunOptions { out_dir: out, seed: None, threads: Some(2), plots: true })?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    let csv = std::fs::read_to_string(&report.files[0])?;
    print!("{csv}");
    Ok(())
}
