use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochastic_quartic::cli::{self, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(version, about = "Stochastic quartic oscillator experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV, SVG and manifest files.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides SEED and the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides THREADS.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match execute(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> stochastic_quartic::Result<()> {
    match command {
        Command::Validate { config } => {
            print!("{}", cli::validate(&config)?);
            println!("ok");
        }
        Command::Run { config, out, seed, threads, no_plots } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let opts = RunOptions {
                out_dir: out,
                seed: seed.or(cli::env_override("SEED")?),
                threads: threads.or(cli::env_override("THREADS")?),
                plots: !no_plots,
            };
            let report = cli::run(&cfg, &opts)?;
            println!("seed {}", report.seed_used);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
