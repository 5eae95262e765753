//! Semiclassical propagator from classical paths and Gelfand–Yaglom
//! determinants, and the ħ² partition function.
//!
//! Classical paths solve `ẍ + ω²x + (λ/m)x³ = 0` with `x(0) = x_i`,
//! `x(t) = x_f`. Each branch contributes
//! `√(m / 2πiħF(t)) e^{iS/ħ}`, where `F̈ + [ω² + 3(λ/m)x̄²]F = 0`,
//! `F(0) = 0`, `Ḟ(0) = 1`; past a zero of `F` the root continues with an
//! extra `e^{−iπ/2}` per zero.
//!
//! Coefficients must be time independent.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;

/// Shooting controls.
#[derive(Clone, Debug, PartialEq)]
pub struct ShootingOptions {
    /// Half-width of the initial-velocity scan; `None` picks a scale from
    /// the boundary data.
    pub v_max: Option<f64>,
    pub n_scan: usize,
    /// Tolerance on `|x(t) − x_f|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest RK4 step.
    pub max_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { v_max: None, n_scan: 201, tol: 1e-10, max_iter: 100, max_step: 1e-3 }
    }
}

/// A converged classical path sampled on `n_grid + 1` uniform nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalPath {
    pub x_i: f64,
    pub x_f: f64,
    pub t: f64,
    pub initial_velocity: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// `∫ L dτ`, integrated alongside the path.
    pub action: f64,
    /// `m ẋ²/2 + V(x)` at τ = 0.
    pub energy: f64,
}

impl ClassicalPath {
    pub fn dtau(&self) -> f64 {
        self.t / (self.positions.len() - 1) as f64
    }

    /// Largest relative energy deviation over the samples.
    pub fn energy_drift(&self, params: &ModelParams) -> f64 {
        let c = Coefficients::of(params).expect("validated at construction");
        let scale = self.energy.abs().max(f64::MIN_POSITIVE);
        self.positions
            .iter()
            .zip(&self.velocities)
            .map(|(&x, &v)| (c.energy(x, v) - self.energy).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Gelfand–Yaglom data at the endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationDet {
    /// `F(t)` for `ω² + 3(λ/m)x̄²`.
    pub big_f: f64,
    /// `f(t)` for `ω² + (λ/m)x̄²`.
    pub small_f: f64,
    /// Sign changes of `F` on `(0, t)`.
    pub conjugate_points: usize,
}

#[derive(Clone, Copy, Debug)]
struct Coefficients {
    mass: f64,
    omega_sq: f64,
    lambda: f64,
}

impl Coefficients {
    fn of(params: &ModelParams) -> Result<Self> {
        params.validate(&[0.0])?;
        if !params.is_time_independent() {
            return Err(invalid("semiclassical module needs time-independent coefficients"));
        }
        Ok(Self { mass: params.mass, omega_sq: params.omega()?.powi(2), lambda: params.lambda_const()? })
    }

    fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * self.mass * self.omega_sq * x2 + 0.25 * self.lambda * x2 * x2
    }

    fn energy(&self, x: f64, v: f64) -> f64 {
        0.5 * self.mass * v * v + self.potential(x)
    }

    /// `[x, v, S, F, Ḟ, f, ḟ]`.
    fn rhs(&self, y: &[f64; 7]) -> [f64; 7] {
        let (x, v) = (y[0], y[1]);
        let lx2 = self.lambda * x * x / self.mass;
        [
            v,
            -self.omega_sq * x - lx2 * x,
            0.5 * self.mass * v * v - self.potential(x),
            y[4],
            -(self.omega_sq + 3.0 * lx2) * y[3],
            y[6],
            -(self.omega_sq + lx2) * y[5],
        ]
    }
}

fn rk4_step(c: &Coefficients, y: &[f64; 7], h: f64) -> [f64; 7] {
    let add = |a: &[f64; 7], k: &[f64; 7], s: f64| std::array::from_fn(|i| a[i] + s * k[i]);
    let k1 = c.rhs(y);
    let k2 = c.rhs(&add(y, &k1, h / 2.0));
    let k3 = c.rhs(&add(y, &k2, h / 2.0));
    let k4 = c.rhs(&add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates from `(x_i, v0)` over `[0, t]`, recording `n_out + 1` uniform
/// samples and counting sign changes of `F` at every substep.
fn integrate(
    c: &Coefficients,
    x_i: f64,
    v0: f64,
    t: f64,
    n_out: usize,
    max_step: f64,
) -> (Vec<[f64; 7]>, usize) {
    let sub = ((t / n_out as f64) / max_step).ceil().max(1.0) as usize;
    let h = t / (n_out * sub) as f64;
    let mut y = [x_i, v0, 0.0, 0.0, 1.0, 0.0, 1.0];
    let mut out = Vec::with_capacity(n_out + 1);
    out.push(y);
    let mut crossings = 0;
    for _ in 0..n_out {
        for _ in 0..sub {
            let next = rk4_step(c, &y, h);
            if next[3] * y[3] < 0.0 {
                crossings += 1;
            }
            y = next;
        }
        out.push(y);
    }
    (out, crossings)
}

fn endpoint(c: &Coefficients, x_i: f64, v0: f64, t: f64, max_step: f64) -> [f64; 7] {
    let n = (t / max_step).ceil().max(1.0) as usize;
    integrate(c, x_i, v0, t, n, max_step).0[n]
}

fn check_boundary(x_i: f64, x_f: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("propagation time must be positive"));
    }
    if !(x_i.is_finite() && x_f.is_finite()) {
        return Err(invalid("boundary positions must be finite"));
    }
    Ok(())
}

/// Initial velocities of all classical paths found in the scan, ordered by
/// `|v0|` (then by sign), so the slowest path is branch 0.
pub fn find_branches(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    opts: &ShootingOptions,
) -> Result<Vec<f64>> {
    check_boundary(x_i, x_f, t)?;
    let c = Coefficients::of(params)?;
    if opts.n_scan < 3 || !(opts.tol > 0.0) || !(opts.max_step > 0.0) {
        return Err(invalid("shooting needs n_scan >= 3, tol > 0, max_step > 0"));
    }
    let omega = c.omega_sq.sqrt();
    // harmonic initial velocity sets the scale when it is finite
    let sin = (omega * t).sin();
    let v_harmonic = if omega > 0.0 && sin.abs() > 1e-3 {
        omega * (x_f - x_i * (omega * t).cos()).abs() / sin.abs()
    } else {
        0.0
    };
    let v_max = opts.v_max.unwrap_or(
        4.0 * ((x_f - x_i).abs() / t + omega * (x_i.abs() + x_f.abs()) + v_harmonic + 1.0),
    );
    // odd count keeps v0 = 0 on the scan
    let n = opts.n_scan | 1;
    let miss = |v: f64| endpoint(&c, x_i, v, t, opts.max_step)[0] - x_f;
    let vs: Vec<f64> = (0..n).map(|k| -v_max + 2.0 * v_max * k as f64 / (n - 1) as f64).collect();
    let ms: Vec<f64> = vs.iter().map(|&v| miss(v)).collect();

    let mut roots = Vec::new();
    for k in 0..n {
        if ms[k].abs() < opts.tol {
            roots.push(vs[k]);
            continue;
        }
        if k + 1 < n && ms[k].is_finite() && ms[k + 1].is_finite() && ms[k] * ms[k + 1] < 0.0 && ms[k + 1].abs() >= opts.tol {
            if let Some(v) = refine(&miss, (vs[k], ms[k]), (vs[k + 1], ms[k + 1]), opts) {
                roots.push(v);
            }
        }
    }
    roots.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    Ok(roots)
}

/// Illinois false position inside a sign-change bracket.
fn refine(
    miss: &dyn Fn(f64) -> f64,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    opts: &ShootingOptions,
) -> Option<f64> {
    let mut side = 0i8;
    for _ in 0..opts.max_iter {
        let v = (a * fb - b * fa) / (fb - fa);
        let fv = miss(v);
        if !fv.is_finite() {
            return None;
        }
        if fv.abs() < opts.tol {
            return Some(v);
        }
        if fv * fb < 0.0 {
            a = b;
            fa = fb;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        b = v;
        fb = fv;
        if (b - a).abs() <= f64::EPSILON * b.abs().max(1.0) {
            return (fb.abs() < opts.tol).then_some(b);
        }
    }
    None
}

/// Classical path of the given branch, sampled on `n_grid + 1` nodes.
pub fn classical_trajectory(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    n_grid: usize,
    branch: usize,
) -> Result<ClassicalPath> {
    classical_trajectory_with(params, x_i, x_f, t, n_grid, branch, &ShootingOptions::default())
}

pub fn classical_trajectory_with(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    n_grid: usize,
    branch: usize,
    opts: &ShootingOptions,
) -> Result<ClassicalPath> {
    if n_grid < 2 {
        return Err(invalid("classical path needs n_grid >= 2"));
    }
    let roots = find_branches(params, x_i, x_f, t, opts)?;
    let v0 = *roots.get(branch).ok_or_else(|| {
        Error::NoSolution(format!("branch {branch} not found ({} converged)", roots.len()))
    })?;
    path_from_velocity(params, x_i, x_f, t, v0, n_grid, opts.max_step)
}

fn path_from_velocity(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    v0: f64,
    n_grid: usize,
    max_step: f64,
) -> Result<ClassicalPath> {
    let c = Coefficients::of(params)?;
    let (ys, _) = integrate(&c, x_i, v0, t, n_grid, max_step);
    Ok(ClassicalPath {
        x_i,
        x_f,
        t,
        initial_velocity: v0,
        positions: ys.iter().map(|y| y[0]).collect(),
        velocities: ys.iter().map(|y| y[1]).collect(),
        action: ys[n_grid][2],
        energy: c.energy(x_i, v0),
    })
}

/// Composite Simpson quadrature of the Lagrangian over the samples.
pub fn classical_action(path: &ClassicalPath, params: &ModelParams) -> Result<f64> {
    let c = Coefficients::of(params)?;
    let n = path.positions.len() - 1;
    if n % 2 != 0 {
        return Err(invalid("Simpson quadrature needs an even number of intervals"));
    }
    let lagrangian = |k: usize| {
        let v = path.velocities[k];
        0.5 * c.mass * v * v - c.potential(path.positions[k])
    };
    let mut acc = lagrangian(0) + lagrangian(n);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * lagrangian(k);
    }
    Ok(acc * path.dtau() / 3.0)
}

/// `F(t)` and `f(t)` along the path.
pub fn gelfand_yaglom(path: &ClassicalPath, params: &ModelParams) -> Result<FluctuationDet> {
    let c = Coefficients::of(params)?;
    let max_step = (path.dtau()).min(ShootingOptions::default().max_step);
    let n = (path.t / max_step).ceil() as usize;
    let (ys, crossings) = integrate(&c, path.x_i, path.initial_velocity, path.t, n, max_step);
    let end = ys[n];
    if end[3].abs() < 1e-10 * path.t {
        return Err(Error::Caustic { t: path.t });
    }
    Ok(FluctuationDet { big_f: end[3], small_f: end[5], conjugate_points: crossings })
}

/// `det(L_F)/det(L_f)` for the Dirichlet finite-difference operators
/// `L = d²/dτ² + q(τ)` on `n_nodes` interior nodes, written as
/// `det(I + L_f⁻¹ D)` with `D = diag(2λx̄²/m)`. Tends to `F(t)/f(t)`.
pub fn discrete_determinant_ratio(path: &ClassicalPath, params: &ModelParams, n_nodes: usize) -> Result<f64> {
    let c = Coefficients::of(params)?;
    if n_nodes < 2 {
        return Err(invalid("determinant check needs at least two nodes"));
    }
    let max_step = ShootingOptions::default().max_step;
    let (ys, _) = integrate(&c, path.x_i, path.initial_velocity, path.t, n_nodes + 1, max_step);
    let h = path.t / (n_nodes + 1) as f64;
    let x2 = |j: usize| ys[j + 1][0].powi(2);
    let mut lf = DMatrix::<f64>::zeros(n_nodes, n_nodes);
    for j in 0..n_nodes {
        lf[(j, j)] = -2.0 / (h * h) + c.omega_sq + c.lambda * x2(j) / c.mass;
        if j + 1 < n_nodes {
            lf[(j, j + 1)] = 1.0 / (h * h);
            lf[(j + 1, j)] = 1.0 / (h * h);
        }
    }
    let inv = lf
        .try_inverse()
        .ok_or_else(|| Error::Caustic { t: path.t })?;
    let d = DMatrix::from_fn(n_nodes, n_nodes, |i, j| {
        if i == j { 2.0 * c.lambda * x2(j) / c.mass } else { 0.0 }
    });
    Ok((DMatrix::identity(n_nodes, n_nodes) + inv * d).determinant())
}

/// One branch's term `√(m/2πħ|F|) e^{−iπ/4} e^{−iνπ/2} e^{iS/ħ}`.
pub fn branch_contribution(path: &ClassicalPath, params: &ModelParams) -> Result<Complex64> {
    let det = gelfand_yaglom(path, params)?;
    let hbar = params.hbar;
    let amp = (params.mass / (2.0 * std::f64::consts::PI * hbar * det.big_f.abs())).sqrt();
    let phase = -std::f64::consts::FRAC_PI_4
        - det.conjugate_points as f64 * std::f64::consts::FRAC_PI_2
        + path.action / hbar;
    Ok(Complex64::from_polar(amp, phase))
}

/// Sum over the first `branches` converged classical paths. Branches that
/// land on a caustic are skipped.
pub fn semiclassical_propagator(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    branches: usize,
) -> Result<Complex64> {
    if branches == 0 {
        return Err(invalid("at least one branch is required"));
    }
    let opts = ShootingOptions::default();
    let roots = find_branches(params, x_i, x_f, t, &opts)?;
    let mut total = Complex64::new(0.0, 0.0);
    let mut used = 0;
    for &v0 in roots.iter().take(branches) {
        let path = path_from_velocity(params, x_i, x_f, t, v0, 2, opts.max_step)?;
        match branch_contribution(&path, params) {
            Ok(g) => {
                total += g;
                used += 1;
            }
            Err(Error::Caustic { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::NoSolution(format!("no usable classical path from {x_i} to {x_f} in time {t}")));
    }
    Ok(total)
}

fn partition_quadrature(
    params: &ModelParams,
    beta: f64,
    x_cutoff: f64,
    n_quad: usize,
    correction: bool,
) -> Result<f64> {
    let c = Coefficients::of(params)?;
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    if !(x_cutoff > 0.0) || n_quad < 2 {
        return Err(invalid("partition quadrature needs x_cutoff > 0 and n_quad >= 2"));
    }
    if (-beta * c.potential(x_cutoff)).exp() > 1e-12 {
        return Err(Error::Accuracy(format!("cutoff {x_cutoff} leaves a Boltzmann tail above 1e-12")));
    }
    let hbar = params.hbar;
    let k = hbar * hbar * beta * beta / (12.0 * c.mass);
    let integrand = |x: f64| {
        let x2 = x * x;
        let vp = c.mass * c.omega_sq * x + c.lambda * x * x2;
        let vpp = c.mass * c.omega_sq + 3.0 * c.lambda * x2;
        let boltz = (-beta * c.potential(x)).exp();
        let corr = if correction { 1.0 + k * (beta * vp * vp / 2.0 - vpp) } else { 1.0 };
        Complex64::new(boltz * corr, 0.0)
    };
    let integral = crate::model::simpson(integrand, -x_cutoff, x_cutoff, n_quad).re;
    Ok(integral / hbar * (c.mass / (2.0 * std::f64::consts::PI * beta)).sqrt())
}

/// Classical `Z = (1/ħ)√(m/2πβ) ∫ e^{−βV}` over `[−x_cutoff, x_cutoff]`.
pub fn partition_classical(params: &ModelParams, beta: f64, x_cutoff: f64, n_quad: usize) -> Result<f64> {
    partition_quadrature(params, beta, x_cutoff, n_quad, false)
}

/// Classical `Z` with the `ħ²β²/12m [βV′²/2 − V″]` correction.
pub fn partition_semiclassical(params: &ModelParams, beta: f64, x_cutoff: f64, n_quad: usize) -> Result<f64> {
    partition_quadrature(params, beta, x_cutoff, n_quad, true)
}

/// `1 / 2 sinh(βħω/2)`.
pub fn harmonic_partition(params: &ModelParams, beta: f64) -> Result<f64> {
    let omega = params.omega()?;
    Ok(1.0 / (2.0 * (beta * params.hbar * omega / 2.0).sinh()))
}

/// Leading coefficients of the imaginary-time ħ expansion
/// `ξ⁺ = ħf₁ + ħ³f₃`, `ξᶻ = ħ²g₂`, `ξ⁻ = ħl₁ + ħ³l₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImaginaryTimeCoefficients {
    pub f1: f64,
    pub f3: f64,
    pub g2: f64,
    pub l1: f64,
    pub l3: f64,
}

/// Coefficients for a field whose running integral grows linearly to
/// `W_int` at `β`, so `f₁(τ) = −cτ` with `c = mω² + 2W_int/β`.
pub fn imaginary_time_coefficients(params: &ModelParams, beta: f64, w_int: f64) -> Result<ImaginaryTimeCoefficients> {
    let c = Coefficients::of(params)?;
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    let m = c.mass;
    let slope = m * c.omega_sq + 2.0 * w_int / beta;
    let b3 = beta.powi(3);
    Ok(ImaginaryTimeCoefficients {
        f1: -slope * beta,
        f3: slope * slope * b3 / (3.0 * m),
        g2: -slope * beta * beta / m,
        l1: -beta / m,
        l3: slope * b3 / (3.0 * m * m),
    })
}
