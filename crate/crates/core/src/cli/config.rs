//! Typed experiment configuration read from [`Ini`] text.
//!
//! Every entry must be consumed by the selected experiment kind; leftover
//! keys are reported with their line. The `[manifest]` section written by
//! a run is accepted and ignored.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Schedule};
use crate::observables::{GaussianPacket, Which};

use super::ini::Ini;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Moments,
    Commuting,
    Harmonic,
    FirstPassage,
    Propagator,
    Dyson,
    SemiclassicalG,
    Partition,
    Wigner,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Moments,
        Kind::Commuting,
        Kind::Harmonic,
        Kind::FirstPassage,
        Kind::Propagator,
        Kind::Dyson,
        Kind::SemiclassicalG,
        Kind::Partition,
        Kind::Wigner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Moments => "moments",
            Kind::Commuting => "commuting",
            Kind::Harmonic => "harmonic",
            Kind::FirstPassage => "first-passage",
            Kind::Propagator => "propagator",
            Kind::Dyson => "dyson",
            Kind::SemiclassicalG => "semiclassical-G",
            Kind::Partition => "partition",
            Kind::Wigner => "wigner",
        }
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// `n_points` uniform times in `[t_start, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.t_start];
        }
        let h = (self.t_end - self.t_start) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.t_start + i as f64 * h).collect()
    }
}

/// Crank–Nicolson grid used for the reference column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceGrid {
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Moments {
        packet: GaussianPacket,
        dt: f64,
        n_traj: usize,
        times: TimeGrid,
        observables: Vec<(usize, Which)>,
        reference: Option<ReferenceGrid>,
    },
    Commuting {
        packet: GaussianPacket,
        n_samples: usize,
        times: TimeGrid,
        observables: Vec<(usize, Which)>,
        reference: Option<ReferenceGrid>,
    },
    Harmonic {
        packet: GaussianPacket,
        dt: f64,
        times: TimeGrid,
        observables: Vec<(usize, Which)>,
    },
    FirstPassage {
        sigma: f64,
        dt: f64,
        n_traj: usize,
        t_max: f64,
        lambdas: Vec<f64>,
    },
    Propagator {
        x_i: f64,
        x_f: f64,
        times: Vec<f64>,
        dt: f64,
        n_traj: usize,
    },
    Dyson {
        dim: usize,
        t: f64,
        lambdas: Vec<f64>,
        sector: usize,
        max_order: usize,
    },
    SemiclassicalG {
        x_i: f64,
        x_f: f64,
        times: Vec<f64>,
        branches: usize,
    },
    Partition {
        betas: Vec<f64>,
        hbars: Vec<f64>,
        x_cutoff: f64,
        n_quad: usize,
        spectral_tol: f64,
    },
    Wigner {
        packet: GaussianPacket,
        plus: f64,
        z: f64,
        minus: f64,
        n_grid: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub params: ModelParams,
    pub task: Task,
    /// Parsed source, re-emitted in the manifest.
    pub source: Ini,
}

struct Reader<'a> {
    ini: &'a Ini,
    used: RefCell<HashSet<(String, String)>>,
}

impl<'a> Reader<'a> {
    fn new(ini: &'a Ini) -> Self {
        Self { ini, used: RefCell::new(HashSet::new()) }
    }

    fn raw(&self, section: &str, key: &str) -> Option<(&'a str, usize)> {
        let e = self.ini.get(section, key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some((e.value.as_str(), e.line))
    }

    fn missing(&self, section: &str, key: &str) -> Error {
        let line = self.ini.section(section).map_or(0, |s| s.line);
        Error::Config { line, msg: format!("missing field `{key}` in [{section}]") }
    }

    fn opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("cannot parse `{key} = {v}` in [{section}]"),
            }),
        }
    }

    fn req<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.opt(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.opt(section, key)?.unwrap_or(default))
    }

    fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.raw(section, key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| Error::Config { line, msg: format!("`{key}` must be a comma-separated list of numbers") })
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.ini.get(section, key).map_or(0, |e| e.line)
    }

    /// Rejects entries the selected kind never read.
    fn finish(&self, kind: Kind) -> Result<()> {
        let used = self.used.borrow();
        for s in self.ini.sections.iter().filter(|s| s.name != "manifest") {
            for e in &s.entries {
                if !used.contains(&(s.name.clone(), e.key.clone())) {
                    return Err(Error::Config {
                        line: e.line,
                        msg: format!("key `{}` in [{}] is not used by kind {}", e.key, s.name, kind.name()),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `0.2`, `sin2(0.2)` or `table(t0:v0, t1:v1, ...)`.
pub fn parse_schedule(text: &str) -> std::result::Result<Schedule, String> {
    let s = text.trim();
    if let Some(inner) = s.strip_prefix("sin2(").and_then(|r| r.strip_suffix(')')) {
        return inner.trim().parse().map(Schedule::SinSquared).map_err(|_| format!("bad amplitude in `{s}`"));
    }
    if let Some(inner) = s.strip_prefix("table(").and_then(|r| r.strip_suffix(')')) {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for pair in inner.split(',') {
            let (t, v) = pair.split_once(':').ok_or_else(|| format!("table entry `{pair}` is not `t:v`"))?;
            times.push(t.trim().parse::<f64>().map_err(|_| format!("bad time `{t}`"))?);
            values.push(v.trim().parse::<f64>().map_err(|_| format!("bad value `{v}`"))?);
        }
        return Schedule::tabulated(times, values).map_err(|e| e.to_string());
    }
    s.parse().map(Schedule::Constant).map_err(|_| format!("cannot parse schedule `{s}`"))
}

pub fn describe_schedule(s: &Schedule) -> String {
    match s {
        Schedule::Constant(c) => format!("{c:?}"),
        Schedule::SinSquared(a) => format!("{a:?}·sin²(t)"),
        Schedule::Tabulated { times, .. } => format!("table[{} points]", times.len()),
    }
}

/// `x2` → `(2, Position)`, `p1` → `(1, Momentum)`.
pub fn parse_observable(s: &str) -> Option<(usize, Which)> {
    let s = s.trim();
    let which = match s.chars().next()? {
        'x' => Which::Position,
        'p' => Which::Momentum,
        _ => return None,
    };
    Some((s[1..].parse().ok()?, which))
}

pub fn observable_name(o: &(usize, Which)) -> String {
    format!("{}{}", o.1.label(), o.0)
}

fn field_error(r: &Reader, section: &str, key: &str, msg: impl Into<String>) -> Error {
    Error::Config { line: r.line_of(section, key), msg: msg.into() }
}

fn positive(r: &Reader, section: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_error(r, section, key, format!("`{key}` must be positive, got {v}")))
    }
}

fn read_params(r: &Reader) -> Result<ModelParams> {
    let mass = positive(r, "model", "mass", r.req("model", "mass")?)?;
    let hbar = positive(r, "model", "hbar", r.or("model", "hbar", 1.0)?)?;
    let schedule = |key: &str| -> Result<Option<Schedule>> {
        match r.raw("model", key) {
            None => Ok(None),
            Some((v, line)) => parse_schedule(v).map(Some).map_err(|msg| Error::Config { line, msg }),
        }
    };
    let omega_sq = match (r.opt::<f64>("model", "omega")?, schedule("omega_sq")?) {
        (Some(_), Some(_)) => {
            return Err(field_error(r, "model", "omega_sq", "give either `omega` or `omega_sq`, not both"))
        }
        (Some(w), None) => Schedule::Constant(w * w),
        (None, Some(s)) => s,
        (None, None) => return Err(r.missing("model", "omega")),
    };
    let lambda = schedule("lambda")?.ok_or_else(|| r.missing("model", "lambda"))?;
    Ok(ModelParams { mass, hbar, omega_sq, lambda })
}

fn read_packet(r: &Reader) -> Result<GaussianPacket> {
    let sigma = r.req("packet", "sigma")?;
    let a = r.or("packet", "a", 0.0)?;
    let k = r.or("packet", "k", 0.0)?;
    GaussianPacket::new(sigma, a, k).map_err(|e| field_error(r, "packet", "sigma", e.to_string()))
}

fn read_times(r: &Reader) -> Result<TimeGrid> {
    let g = TimeGrid {
        t_start: r.or("time", "t_start", 0.0)?,
        t_end: r.req("time", "t_end")?,
        n_points: r.req("time", "n_points")?,
    };
    if !(g.t_start >= 0.0 && g.t_end >= g.t_start) || g.n_points == 0 {
        return Err(field_error(r, "time", "t_end", "time grid needs 0 <= t_start <= t_end and n_points >= 1"));
    }
    Ok(g)
}

fn read_observables(r: &Reader, max_n: Option<usize>) -> Result<Vec<(usize, Which)>> {
    let (v, line) = r.raw("observables", "moments").ok_or_else(|| r.missing("observables", "moments"))?;
    let obs: Vec<_> = v
        .split(',')
        .map(|s| parse_observable(s).ok_or_else(|| Error::Config { line, msg: format!("bad observable `{}`", s.trim()) }))
        .collect::<Result<_>>()?;
    if obs.is_empty() {
        return Err(Error::Config { line, msg: "no observables listed".into() });
    }
    if let Some(m) = max_n {
        if let Some(o) = obs.iter().find(|o| o.0 > m) {
            return Err(Error::Config {
                line,
                msg: format!("observable {} exceeds the reference limit n <= {m}", observable_name(o)),
            });
        }
    }
    Ok(obs)
}

fn read_reference(r: &Reader) -> Result<Option<ReferenceGrid>> {
    if r.ini.section("reference").is_none() {
        return Ok(None);
    }
    let g = ReferenceGrid {
        half_width: r.req("reference", "half_width")?,
        dx: r.req("reference", "dx")?,
        dt: r.req("reference", "dt")?,
    };
    for (key, v) in [("half_width", g.half_width), ("dx", g.dx), ("dt", g.dt)] {
        positive(r, "reference", key, v)?;
    }
    Ok(Some(g))
}

fn read_sampling(r: &Reader) -> Result<(f64, usize)> {
    let dt = positive(r, "sampling", "dt", r.req("sampling", "dt")?)?;
    let n_traj: usize = r.req("sampling", "n_traj")?;
    if n_traj < 2 {
        return Err(field_error(r, "sampling", "n_traj", "`n_traj` must be at least 2"));
    }
    Ok((dt, n_traj))
}

fn sample_span(t_end: f64) -> Vec<f64> {
    (0..=64).map(|i| t_end * i as f64 / 64.0).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_ini(Ini::parse(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_ini(ini: Ini) -> Result<Self> {
        let r = Reader::new(&ini);
        let kind: Kind = match r.raw("experiment", "kind") {
            None => return Err(r.missing("experiment", "kind")),
            Some((v, line)) => v.parse().map_err(|msg| Error::Config { line, msg })?,
        };
        let seed = r.or("experiment", "seed", 0u64)?;
        let params = read_params(&r)?;
        let model_err = |e: Error| Error::Config { line: ini.section("model").map_or(0, |s| s.line), msg: e.to_string() };

        let task = match kind {
            Kind::Moments => {
                let (dt, n_traj) = read_sampling(&r)?;
                let reference = read_reference(&r)?;
                Task::Moments {
                    packet: read_packet(&r)?,
                    dt,
                    n_traj,
                    times: read_times(&r)?,
                    observables: read_observables(&r, reference.map(|_| 4))?,
                    reference,
                }
            }
            Kind::Commuting => {
                let reference = read_reference(&r)?;
                let n_samples = r.req("sampling", "n_traj")?;
                if params.omega_sq.constant_value().is_none() || params.lambda.constant_value().is_none() {
                    return Err(field_error(&r, "model", "lambda", "commuting limit needs constant coefficients"));
                }
                Task::Commuting {
                    packet: read_packet(&r)?,
                    n_samples,
                    times: read_times(&r)?,
                    observables: read_observables(&r, reference.map(|_| 4))?,
                    reference,
                }
            }
            Kind::Harmonic => {
                if params.lambda.constant_value() != Some(0.0) || !params.omega_sq.is_constant() {
                    return Err(field_error(&r, "model", "lambda", "harmonic kind needs lambda = 0 and constant omega"));
                }
                Task::Harmonic {
                    packet: read_packet(&r)?,
                    dt: positive(&r, "sampling", "dt", r.req("sampling", "dt")?)?,
                    times: read_times(&r)?,
                    observables: read_observables(&r, None)?,
                }
            }
            Kind::FirstPassage => {
                let (dt, n_traj) = read_sampling(&r)?;
                let t_max = positive(&r, "first_passage", "t_max", r.req("first_passage", "t_max")?)?;
                let sigma = r.req("packet", "sigma")?;
                GaussianPacket::new(sigma, 0.0, 0.0).map_err(|e| field_error(&r, "packet", "sigma", e.to_string()))?;
                let lambdas = match r.list("first_passage", "lambdas")? {
                    Some(l) => l,
                    None => vec![lambda_scale(&params.lambda)],
                };
                if lambdas.iter().any(|&l| !(l >= 0.0)) {
                    return Err(field_error(&r, "first_passage", "lambdas", "lambda values must be non-negative"));
                }
                Task::FirstPassage { sigma, dt, n_traj, t_max, lambdas }
            }
            Kind::Propagator => {
                let (dt, n_traj) = read_sampling(&r)?;
                Task::Propagator {
                    x_i: r.req("propagator", "x_i")?,
                    x_f: r.req("propagator", "x_f")?,
                    times: read_positive_list(&r, "propagator", "times")?,
                    dt,
                    n_traj,
                }
            }
            Kind::SemiclassicalG => Task::SemiclassicalG {
                x_i: r.req("propagator", "x_i")?,
                x_f: r.req("propagator", "x_f")?,
                times: read_positive_list(&r, "propagator", "times")?,
                branches: r.or("semiclassical", "branches", 1usize)?,
            },
            Kind::Dyson => {
                let lambdas = read_positive_list(&r, "dyson", "lambdas")?;
                let max_order: usize = r.or("dyson", "max_order", 2)?;
                if max_order > 2 {
                    return Err(field_error(&r, "dyson", "max_order", "Dyson terms are available up to order 2"));
                }
                Task::Dyson {
                    dim: r.req("dyson", "dim")?,
                    t: positive(&r, "dyson", "t", r.req("dyson", "t")?)?,
                    lambdas,
                    sector: r.or("dyson", "sector", 1usize)?,
                    max_order,
                }
            }
            Kind::Partition => Task::Partition {
                betas: read_positive_list(&r, "partition", "betas")?,
                hbars: match r.list("partition", "hbars")? {
                    Some(h) if h.iter().all(|&v| v > 0.0) => h,
                    Some(_) => return Err(field_error(&r, "partition", "hbars", "hbar values must be positive")),
                    None => vec![params.hbar],
                },
                x_cutoff: positive(&r, "partition", "x_cutoff", r.req("partition", "x_cutoff")?)?,
                n_quad: r.or("partition", "n_quad", 4000usize)?,
                spectral_tol: r.or("partition", "spectral_tol", 1e-10)?,
            },
            Kind::Wigner => Task::Wigner {
                packet: read_packet(&r)?,
                plus: r.or("wigner", "plus", 0.0)?,
                z: r.or("wigner", "z", 0.0)?,
                minus: r.or("wigner", "minus", 0.0)?,
                n_grid: r.or("wigner", "n_grid", 101usize)?,
            },
        };
        r.finish(kind)?;

        let horizon = match &task {
            Task::Moments { times, .. } | Task::Commuting { times, .. } | Task::Harmonic { times, .. } => times.t_end,
            Task::FirstPassage { t_max, .. } => *t_max,
            Task::Propagator { times, .. } | Task::SemiclassicalG { times, .. } => {
                times.iter().cloned().fold(0.0, f64::max)
            }
            Task::Dyson { t, .. } => *t,
            _ => 0.0,
        };
        params.validate(&sample_span(horizon)).map_err(model_err)?;
        if matches!(task, Task::Moments { .. } | Task::Commuting { .. } | Task::Harmonic { .. } | Task::Wigner { .. })
            && params.hbar != 1.0
        {
            return Err(field_error(&r, "model", "hbar", "moment and Wigner kinds work in units with hbar = 1"));
        }
        Ok(Self { seed, params, task, source: ini.clone() })
    }

    pub fn kind(&self) -> Kind {
        match self.task {
            Task::Moments { .. } => Kind::Moments,
            Task::Commuting { .. } => Kind::Commuting,
            Task::Harmonic { .. } => Kind::Harmonic,
            Task::FirstPassage { .. } => Kind::FirstPassage,
            Task::Propagator { .. } => Kind::Propagator,
            Task::Dyson { .. } => Kind::Dyson,
            Task::SemiclassicalG { .. } => Kind::SemiclassicalG,
            Task::Partition { .. } => Kind::Partition,
            Task::Wigner { .. } => Kind::Wigner,
        }
    }

    /// Trajectory count times steps per trajectory, for stochastic kinds.
    pub fn estimated_cost(&self) -> Option<(u64, u64)> {
        let steps = |t: f64, dt: f64| (t / dt).round() as u64;
        match &self.task {
            Task::Moments { dt, n_traj, times, .. } => Some((*n_traj as u64, steps(times.t_end, *dt))),
            Task::Harmonic { dt, times, .. } => Some((2, steps(times.t_end, *dt))),
            Task::Commuting { n_samples, times, .. } => Some((*n_samples as u64, times.n_points as u64)),
            Task::FirstPassage { dt, n_traj, t_max, lambdas, .. } => {
                Some(((*n_traj * lambdas.len()) as u64, steps(*t_max, *dt)))
            }
            Task::Propagator { dt, n_traj, times, .. } => {
                Some(((*n_traj * times.len()) as u64, steps(times.iter().cloned().fold(0.0, f64::max), *dt)))
            }
            _ => None,
        }
    }

    /// Human-readable summary of the resolved parameters.
    pub fn summary(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "kind={}, seed={}", self.kind().name(), self.seed);
        let _ = writeln!(
            s,
            "m={:?}, hbar={:?}, omega^2={}, λ={}",
            p.mass,
            p.hbar,
            describe_schedule(&p.omega_sq),
            describe_schedule(&p.lambda)
        );
        let packet = match &self.task {
            Task::Moments { packet, .. }
            | Task::Commuting { packet, .. }
            | Task::Harmonic { packet, .. }
            | Task::Wigner { packet, .. } => Some(*packet),
            Task::FirstPassage { sigma, .. } => Some(GaussianPacket { sigma: *sigma, a: 0.0, k: 0.0 }),
            _ => None,
        };
        if let Some(q) = packet {
            let _ = writeln!(s, "σ={:?}, k={:?}, a={:?}, λ={}", q.sigma, q.k, q.a, describe_schedule(&p.lambda));
        }
        if let Some((n, steps)) = self.estimated_cost() {
            let _ = writeln!(s, "estimated cost: {n} trajectories × {steps} steps = {:.3e} steps", n as f64 * steps as f64);
        }
        s
    }
}

/// Constant λ, or the amplitude of a `sin2` schedule.
fn lambda_scale(s: &Schedule) -> f64 {
    match s {
        Schedule::Constant(c) | Schedule::SinSquared(c) => *c,
        Schedule::Tabulated { values, .. } => values.iter().cloned().fold(0.0, f64::max),
    }
}

fn read_positive_list(r: &Reader, section: &str, key: &str) -> Result<Vec<f64>> {
    let l = r.list(section, key)?.ok_or_else(|| r.missing(section, key))?;
    if l.iter().any(|&v| !(v > 0.0)) {
        return Err(field_error(r, section, key, format!("`{key}` values must be positive")));
    }
    Ok(l)
}
