//! Executes a validated [`ExperimentConfig`] and writes its artifacts.

use std::path::{Path, PathBuf};

use crate::disentangle::first_passage_statistics;
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, Schedule};
use crate::observables::{
    estimate_commuting_moments, estimate_moments, estimate_propagator, harmonic_moment, GaussianPacket,
    MomentEstimate, MonteCarlo, Which,
};
use crate::perturbation::{dyson_partial_sum, residual_scaling};
use crate::reference::{cn_observe, grid_moment, init_packet, partition_spectral, CnOptions, Grid};
use crate::semiclassical::{partition_classical, partition_semiclassical, semiclassical_propagator};
use crate::wigner::{apply_minus, apply_plus, apply_z, Cumulants, GaussianWigner};

use super::config::{observable_name, ExperimentConfig, ReferenceGrid, Task};
use super::ini::Ini;
use super::output::{Table, Value};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the configured seed.
    pub seed: Option<u64>,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
    pub plots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seed_used: u64,
    pub files: Vec<PathBuf>,
}

/// The configuration as a manifest: source entries with the effective seed,
/// plus a `[manifest]` section.
pub fn manifest(config: &ExperimentConfig, seed_used: u64) -> Ini {
    let mut ini = config.source.clone();
    ini.section_mut("experiment").set("seed", seed_used.to_string());
    let m = ini.section_mut("manifest");
    m.set("code_version", CODE_VERSION);
    m.set("seed_used", seed_used.to_string());
    ini
}

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let seed = opts.seed.unwrap_or(config.seed);
    let tables = match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| invalid(format!("cannot build a {n}-thread pool: {e}")))?;
            pool.install(|| compute(config, seed))?
        }
        None => compute(config, seed)?,
    };
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut files = Vec::new();
    for t in &tables {
        files.push(t.write_csv(&opts.out_dir)?);
        if opts.plots {
            if let Some(svg) = t.to_svg() {
                let path = opts.out_dir.join(format!("{}.svg", t.name));
                match std::fs::write(&path, svg) {
                    Ok(()) => files.push(path),
                    Err(e) => eprintln!("warning: plot {} not written: {e}", path.display()),
                }
            }
        }
    }
    let path = opts.out_dir.join("manifest.ini");
    std::fs::write(&path, manifest(config, seed).to_string())?;
    files.push(path);
    Ok(RunReport { seed_used: seed, files })
}

/// All output tables of one experiment, computed with the given seed.
pub fn compute(config: &ExperimentConfig, seed: u64) -> Result<Vec<Table>> {
    let params = &config.params;
    match &config.task {
        Task::Moments { packet, dt, n_traj, times, observables, reference } => {
            let mc = MonteCarlo { n_traj: *n_traj, seed, dt: *dt };
            let est = estimate_moments(params, packet, observables, &times.times(), &mc)?;
            let snapped: Vec<f64> = est[0].iter().map(|e| e.t).collect();
            let refs = match reference {
                Some(g) => Some(reference_moments(params, packet, observables, &snapped, g, true)?),
                None => None,
            };
            Ok(moment_tables("moments", observables, &est, refs.as_deref(), "reference"))
        }
        Task::Commuting { packet, n_samples, times, observables, reference } => {
            let t = times.times();
            let est = estimate_commuting_moments(params, packet, observables, &t, *n_samples, seed)?;
            let refs = match reference {
                Some(g) => Some(reference_moments(params, packet, observables, &t, g, false)?),
                None => None,
            };
            Ok(moment_tables("commuting", observables, &est, refs.as_deref(), "reference"))
        }
        Task::Harmonic { packet, dt, times, observables } => {
            let mc = MonteCarlo { n_traj: 2, seed, dt: *dt };
            let est = estimate_moments(params, packet, observables, &times.times(), &mc)?;
            let exact: Vec<Vec<f64>> = observables
                .iter()
                .zip(&est)
                .map(|(&(n, which), row)| {
                    row.iter().map(|e| harmonic_moment(n, which, e.t, packet, params)).collect()
                })
                .collect::<Result<_>>()?;
            Ok(moment_tables("harmonic", observables, &est, Some(&exact), "exact"))
        }
        Task::FirstPassage { sigma, dt, n_traj, t_max, lambdas } => {
            let mut t = Table::new(
                "first_passage",
                &["lambda", "mean_t_gamma", "std_t_gamma", "n_observed", "n_censored"],
            );
            for &lam in lambdas {
                let p = with_lambda(params, lam);
                let s = first_passage_statistics(&p, *sigma, *dt, *t_max, *n_traj, seed)?;
                t.push(vec![lam.into(), s.mean.into(), s.std_dev.into(), s.times.len().into(), s.n_censored.into()]);
            }
            t.plot_columns = vec![1, 2];
            Ok(vec![t])
        }
        Task::Propagator { x_i, x_f, times, dt, n_traj } => {
            let mut t = Table::new(
                "propagator",
                &["t", "re", "im", "std_error_re", "std_error_im", "n_samples", "n_excluded"],
            );
            let mc = MonteCarlo { n_traj: *n_traj, seed, dt: *dt };
            for &tt in times {
                let g = estimate_propagator(params, *x_i, *x_f, tt, &mc)?;
                t.push(vec![
                    tt.into(),
                    g.value.re.into(),
                    g.value.im.into(),
                    g.std_error_re.into(),
                    g.std_error_im.into(),
                    g.n_samples.into(),
                    g.n_excluded.into(),
                ]);
            }
            t.plot_columns = vec![1, 2];
            Ok(vec![t])
        }
        Task::SemiclassicalG { x_i, x_f, times, branches } => {
            let mut t = Table::new("semiclassical_propagator", &["x_i", "x_f", "t", "re", "im"]);
            for &tt in times {
                let g = semiclassical_propagator(params, *x_i, *x_f, tt, *branches)?;
                t.push(vec![(*x_i).into(), (*x_f).into(), tt.into(), g.re.into(), g.im.into()]);
            }
            Ok(vec![t])
        }
        Task::Dyson { dim, t, lambdas, sector, max_order } => {
            let mut res = Table::new("dyson_residuals", &["lambda", "order", "residual"]);
            for &lam in lambdas {
                let p = with_lambda(params, lam);
                for order in 0..=*max_order {
                    let r = dyson_partial_sum(&p, *dim, *t, order, *sector)?;
                    res.push(vec![lam.into(), order.into(), r.residual_norm.into()]);
                }
            }
            let mut slopes = Table::new("dyson_slopes", &["order", "slope", "expected"]);
            for order in 0..=*max_order {
                let s = residual_scaling(params, *dim, *t, lambdas, order, *sector)?;
                slopes.push(vec![order.into(), s.into(), ((order + 1) as f64).into()]);
            }
            Ok(vec![res, slopes])
        }
        Task::Partition { betas, hbars, x_cutoff, n_quad, spectral_tol } => {
            let mut t = Table::new("partition", &["beta", "hbar", "z_classical", "z_semi", "z_spectral"]);
            for &hbar in hbars {
                let p = params.clone().with_hbar(hbar);
                for &beta in betas {
                    t.push(vec![
                        beta.into(),
                        hbar.into(),
                        partition_classical(&p, beta, *x_cutoff, *n_quad)?.into(),
                        partition_semiclassical(&p, beta, *x_cutoff, *n_quad)?.into(),
                        partition_spectral(&p, beta, *spectral_tol)?.into(),
                    ]);
                }
            }
            if hbars.len() == 1 {
                t.plot_columns = vec![2, 3, 4];
            }
            Ok(vec![t])
        }
        Task::Wigner { packet, plus, z, minus, n_grid } => Ok(wigner_tables(packet, *plus, *z, *minus, *n_grid)),
    }
}

/// Same schedule shape with the coupling (or its amplitude) replaced.
fn with_lambda(params: &ModelParams, lam: f64) -> ModelParams {
    let lambda = match params.lambda {
        Schedule::SinSquared(_) => Schedule::SinSquared(lam),
        _ => Schedule::Constant(lam),
    };
    ModelParams { lambda, ..params.clone() }
}

fn reference_moments(
    params: &ModelParams,
    packet: &GaussianPacket,
    observables: &[(usize, Which)],
    times: &[f64],
    g: &ReferenceGrid,
    kinetic: bool,
) -> Result<Vec<Vec<f64>>> {
    let grid = Grid::symmetric(g.half_width, g.dx, g.dt)?;
    let start = init_packet(packet, &grid)?;
    let opts = CnOptions { kinetic, ..CnOptions::default() };
    let mut out = vec![Vec::with_capacity(times.len()); observables.len()];
    cn_observe(&start, &grid, params, times, &opts, |s| {
        for (o, &(n, which)) in observables.iter().enumerate() {
            out[o].push(grid_moment(s, &grid, n, which, params.hbar)?);
        }
        Ok(())
    })?;
    Ok(out)
}

fn moment_tables(
    prefix: &str,
    observables: &[(usize, Which)],
    est: &[Vec<MomentEstimate>],
    extra: Option<&[Vec<f64>]>,
    extra_name: &str,
) -> Vec<Table> {
    let mut header = vec!["t", "value", "std_error", "n_samples", "n_excluded"];
    if extra.is_some() {
        header.push(extra_name);
    }
    observables
        .iter()
        .enumerate()
        .map(|(o, obs)| {
            let mut t = Table::new(format!("{prefix}_{}", observable_name(obs)), &header);
            for (j, e) in est[o].iter().enumerate() {
                let mut row: Vec<Value> =
                    vec![e.t.into(), e.value.into(), e.std_error.into(), e.n_samples.into(), e.n_excluded.into()];
                if let Some(x) = extra {
                    row.push(x[o][j].into());
                }
                t.push(row);
            }
            t.plot_columns = if extra.is_some() { vec![1, 5] } else { vec![1] };
            t
        })
        .collect()
}

fn cumulant_row(stage: &str, c: &Cumulants) -> Vec<Value> {
    vec![
        stage.into(),
        c.mean_x.into(),
        c.mean_p.into(),
        c.var_x.into(),
        c.var_p.into(),
        c.cov_xp.into(),
        c.uncertainty_product().into(),
    ]
}

/// Applies `exp(ξ⁻Ŝ⁻)`, then `exp(ξᶻŜᶻ)`, then `exp(ξ⁺Ŝ⁺)`.
fn wigner_tables(packet: &GaussianPacket, plus: f64, z: f64, minus: f64, n_grid: usize) -> Vec<Table> {
    let mut t = Table::new(
        "wigner_cumulants",
        &["stage", "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "uncertainty"],
    );
    let w0 = GaussianWigner::from_packet(packet);
    let w1 = apply_minus(&w0, minus);
    let w2 = apply_z(&w1, z);
    let w3 = apply_plus(&w2, plus);
    for (stage, w) in [("initial", &w0), ("minus", &w1), ("z", &w2), ("plus", &w3)] {
        t.push(cumulant_row(stage, &w.cumulants()));
    }
    let c = w3.cumulants();
    let (hx, hp) = (5.0 * c.var_x.sqrt(), 5.0 * c.var_p.sqrt());
    let mut g = Table::new("wigner_grid", &["x", "p", "w"]);
    let n = n_grid.max(2);
    for i in 0..n {
        let x = c.mean_x - hx + 2.0 * hx * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let p = c.mean_p - hp + 2.0 * hp * j as f64 / (n - 1) as f64;
            g.push(vec![x.into(), p.into(), w3.value(x, p).into()]);
        }
    }
    vec![t, g]
}

/// Reads and checks a config file, returning its summary.
pub fn validate(path: &Path) -> Result<String> {
    let config = ExperimentConfig::from_path(path)?;
    Ok(config.summary())
}

/// `THREADS`/`SEED`-style override: unset or empty is `None`.
pub fn env_override<T: std::str::FromStr>(name: &str) -> Result<Option<T>> {
    match std::env::var(name) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("environment variable {name}={v} is not valid"))),
        _ => Ok(None),
    }
}
