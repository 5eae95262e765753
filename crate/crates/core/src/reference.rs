//! Deterministic oracles: a Crank–Nicolson grid solver for the
//! time-dependent Schrödinger equation and exact diagonalisation in a
//! truncated harmonic basis.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{hamiltonian_real, ModelParams};
use crate::observables::{GaussianPacket, Which};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, dt: f64) -> Result<Self> {
        if n_points < 64 {
            return Err(invalid("grid needs at least 64 points"));
        }
        if !(x_max > x_min) || !(dt > 0.0) {
            return Err(invalid("grid needs x_max > x_min and dt > 0"));
        }
        Ok(Self { x_min, x_max, n_points, dt })
    }

    /// Grid on `[-half_width, half_width]` with spacing at most `dx`.
    pub fn symmetric(half_width: f64, dx: f64, dt: f64) -> Result<Self> {
        let n = (2.0 * half_width / dx).ceil() as usize + 1;
        Self::new(-half_width, half_width, n, dt)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl GridState {
    pub fn norm(&self, grid: &Grid) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()
    }

    /// Largest |ψ| on the `width` outermost nodes at either edge.
    pub fn edge_amplitude(&self, width: usize) -> f64 {
        let n = self.psi.len();
        let w = width.min(n / 2);
        self.psi[..w]
            .iter()
            .chain(&self.psi[n - w..])
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

pub fn init_packet(packet: &GaussianPacket, grid: &Grid) -> Result<GridState> {
    let lo = packet.a - 6.0 * packet.sigma;
    let hi = packet.a + 6.0 * packet.sigma;
    if lo < grid.x_min || hi > grid.x_max {
        return Err(Error::Config {
            line: 0,
            msg: format!("packet support [{lo}, {hi}] exceeds grid [{}, {}]", grid.x_min, grid.x_max),
        });
    }
    let mut psi: Vec<Complex64> = (0..grid.n_points).map(|j| packet.wavefunction(grid.x(j))).collect();
    let state = GridState { psi: psi.clone(), t: 0.0 };
    let scale = state.norm(grid).sqrt().recip();
    psi.iter_mut().for_each(|z| *z *= scale);
    Ok(GridState { psi, t: 0.0 })
}

/// Arbitrary initial wavefunction sampled on the grid and normalised.
pub fn init_function<F: Fn(f64) -> Complex64>(f: F, grid: &Grid) -> GridState {
    let psi: Vec<Complex64> = (0..grid.n_points).map(|j| f(grid.x(j))).collect();
    let mut state = GridState { psi, t: 0.0 };
    let scale = state.norm(grid).sqrt().recip();
    state.psi.iter_mut().for_each(|z| *z *= scale);
    state
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CnOptions {
    /// Drop `p²/2m` (the commuting limit).
    pub kinetic: bool,
    /// Maximum |ψ| tolerated on the outer nodes.
    pub leak_tolerance: f64,
}

impl Default for CnOptions {
    fn default() -> Self {
        Self { kinetic: true, leak_tolerance: 1e-8 }
    }
}

const EDGE: usize = 4;
const LEAK_CHECK_EVERY: usize = 64;

/// Crank–Nicolson evolution to `t_final` with Dirichlet walls and the
/// potential sampled at the half step.
pub fn cn_evolve(state: &GridState, grid: &Grid, params: &ModelParams, t_final: f64) -> Result<GridState> {
    cn_evolve_with(state, grid, params, t_final, &CnOptions::default(), |_| Ok(()))
}

/// Evolves through `t_grid` (sorted), calling `observe` at each requested
/// time. Time steps are shortened where needed to land on the grid times.
pub fn cn_observe<F>(
    state: &GridState,
    grid: &Grid,
    params: &ModelParams,
    t_grid: &[f64],
    opts: &CnOptions,
    mut observe: F,
) -> Result<GridState>
where
    F: FnMut(&GridState) -> Result<()>,
{
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("observation times must be sorted"));
    }
    let mut s = state.clone();
    for &t in t_grid {
        s = cn_evolve_with(&s, grid, params, t, opts, |_| Ok(()))?;
        observe(&s)?;
    }
    Ok(s)
}

pub fn cn_evolve_with<F>(
    state: &GridState,
    grid: &Grid,
    params: &ModelParams,
    t_final: f64,
    opts: &CnOptions,
    mut each_step: F,
) -> Result<GridState>
where
    F: FnMut(&GridState) -> Result<()>,
{
    if state.psi.len() != grid.n_points {
        return Err(invalid("state and grid sizes differ"));
    }
    if t_final < state.t {
        return Err(invalid("cannot evolve backwards"));
    }
    let span = t_final - state.t;
    let n_steps = (span / grid.dt - 1e-9).ceil().max(0.0) as usize;
    let mut s = state.clone();
    if n_steps == 0 {
        s.t = t_final;
        return Ok(s);
    }
    let dt = span / n_steps as f64;
    let n = grid.n_points;
    let dx = grid.dx();
    let (hbar, m) = (params.hbar, params.mass);
    let xs: Vec<f64> = (0..n).map(|j| grid.x(j)).collect();

    let kin = if opts.kinetic { hbar * hbar / (2.0 * m * dx * dx) } else { 0.0 };
    let tau = Complex64::new(0.0, dt / (2.0 * hbar));
    let off = -tau * kin;
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut cprime = vec![Complex64::new(0.0, 0.0); n];
    let constant = params.is_time_independent();
    let mut v = vec![0.0; n];
    let fill_v = |t: f64, v: &mut [f64]| -> Result<()> {
        let w2 = params.omega_sq_at(t)?;
        let lam = params.lambda_at(t)?;
        for (vj, &x) in v.iter_mut().zip(&xs) {
            let x2 = x * x;
            *vj = 0.5 * m * w2 * x2 + 0.25 * lam * x2 * x2;
        }
        Ok(())
    };
    if constant {
        fill_v(0.0, &mut v)?;
    }

    for step in 0..n_steps {
        let t_mid = s.t + 0.5 * dt;
        if !constant {
            fill_v(t_mid, &mut v)?;
        }
        for j in 0..n {
            let h_diag = 2.0 * kin + v[j];
            diag[j] = 1.0 + tau * h_diag;
            let mut r = (1.0 - tau * h_diag) * s.psi[j];
            if opts.kinetic {
                // explicit half: (1 - iτH)ψ, off-diagonal of H is -kin
                if j > 0 {
                    r += tau * kin * s.psi[j - 1];
                }
                if j + 1 < n {
                    r += tau * kin * s.psi[j + 1];
                }
            }
            rhs[j] = r;
        }
        if opts.kinetic {
            // Thomas solve with constant off-diagonals
            cprime[0] = off / diag[0];
            rhs[0] /= diag[0];
            for j in 1..n {
                let denom = diag[j] - off * cprime[j - 1];
                cprime[j] = off / denom;
                rhs[j] = (rhs[j] - off * rhs[j - 1]) / denom;
            }
            for j in (0..n - 1).rev() {
                let next = rhs[j + 1];
                rhs[j] -= cprime[j] * next;
            }
        } else {
            for j in 0..n {
                rhs[j] /= diag[j];
            }
        }
        std::mem::swap(&mut s.psi, &mut rhs);
        s.t = state.t + (step + 1) as f64 * dt;
        if step % LEAK_CHECK_EVERY == 0 || step + 1 == n_steps {
            let edge = s.edge_amplitude(EDGE);
            if opts.kinetic && edge > opts.leak_tolerance {
                return Err(Error::Accuracy(format!(
                    "wavefunction reached the box edge (|psi| = {edge:.3e}) at t = {}",
                    s.t
                )));
            }
        }
        each_step(&s)?;
    }
    s.t = t_final;
    Ok(s)
}

/// `⟨xⁿ⟩` by quadrature or `⟨pⁿ⟩` through `n` central differences of
/// `−iħ d/dx`; `n ≤ 4`.
pub fn grid_moment(state: &GridState, grid: &Grid, n: usize, which: Which, hbar: f64) -> Result<f64> {
    if n > 4 {
        return Err(invalid("grid moments are limited to n <= 4"));
    }
    let dx = grid.dx();
    match which {
        Which::Position => Ok(state
            .psi
            .iter()
            .enumerate()
            .map(|(j, z)| grid.x(j).powi(n as i32) * z.norm_sqr())
            .sum::<f64>()
            * dx),
        Which::Momentum => {
            let mut phi = state.psi.clone();
            let len = phi.len();
            let scale = Complex64::new(0.0, -hbar / (2.0 * dx));
            for _ in 0..n {
                let mut next = vec![Complex64::new(0.0, 0.0); len];
                for j in 0..len {
                    let up = if j + 1 < len { phi[j + 1] } else { Complex64::new(0.0, 0.0) };
                    let down = if j > 0 { phi[j - 1] } else { Complex64::new(0.0, 0.0) };
                    next[j] = scale * (up - down);
                }
                phi = next;
            }
            Ok(state.psi.iter().zip(&phi).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * dx)
        }
    }
}

/// Basis frequency that self-consistently matches ⟨x²⟩ of the quartic
/// ground state in a harmonic trial state.
pub fn natural_basis_frequency(params: &ModelParams) -> Result<f64> {
    let w2 = params.omega_sq.constant_value().ok_or_else(|| invalid("spectrum needs constant coefficients"))?;
    let lam = params.lambda_const()?;
    let (m, hbar) = (params.mass, params.hbar);
    let mut w = w2.max(0.0).sqrt().max((lam * hbar / (m * m)).cbrt()).max(1e-8);
    for _ in 0..50 {
        w = (w2 + 3.0 * lam * hbar / (2.0 * m * m * w)).sqrt();
    }
    Ok(w)
}

/// Eigenvalues of the truncated Ĥ for a given basis size and frequency.
pub fn spectrum_raw(params: &ModelParams, dim: usize, basis_frequency: f64) -> Result<Vec<f64>> {
    if !params.is_time_independent() {
        return Err(invalid("spectrum needs time-independent coefficients"));
    }
    let h = hamiltonian_real(dim, params, basis_frequency, 0.0)?;
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    Ok(e)
}

/// Lowest levels of Ĥ that are stable to `1e-8` (relative) when the basis
/// is doubled from `dim` to `2·dim`.
pub fn spectrum(params: &ModelParams, dim: usize) -> Result<Vec<f64>> {
    if dim < 4 {
        return Err(invalid("spectrum needs dim >= 4"));
    }
    let w = natural_basis_frequency(params)?;
    let small = spectrum_raw(params, dim, w)?;
    let large = spectrum_raw(params, 2 * dim, w)?;
    let converged: Vec<f64> = small
        .iter()
        .zip(&large)
        .take_while(|(a, b)| (*a - *b).abs() <= 1e-8 * b.abs().max(1.0))
        .map(|(a, _)| *a)
        .collect();
    if converged.is_empty() {
        return Err(Error::Accuracy(format!("ground state not converged at dim {dim}")));
    }
    Ok(converged)
}

/// `Σ e^{−βEₙ}` with the basis doubled until the sum is stable to `rel_tol`.
pub fn partition_spectral(params: &ModelParams, beta: f64, rel_tol: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    let w = natural_basis_frequency(params)?;
    let z = |dim: usize| -> Result<f64> {
        let e = spectrum_raw(params, dim, w)?;
        let e0 = e[0];
        Ok(e.iter().map(|&x| (-beta * (x - e0)).exp()).sum::<f64>() * (-beta * e0).exp())
    };
    let mut dim = 64;
    let mut prev = z(dim)?;
    while dim < 4096 {
        dim *= 2;
        let next = z(dim)?;
        if (next - prev).abs() <= rel_tol * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!("partition function unconverged at dim {dim}")))
}

/// Propagator `G(x_f, t | x_i, 0)` on the grid: a normalised-integral
/// Gaussian of width `s` centred at `x_i` approximates `δ(x − x_i)`; two
/// widths are Richardson-extrapolated in `s²`.
pub fn cn_propagator(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    grid: &Grid,
    widths: (f64, f64),
) -> Result<Complex64> {
    let evolve = |s: f64| -> Result<Complex64> {
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        let psi: Vec<Complex64> = (0..grid.n_points)
            .map(|j| {
                let d = grid.x(j) - x_i;
                Complex64::new(norm * (-d * d / (2.0 * s * s)).exp(), 0.0)
            })
            .collect();
        let start = GridState { psi, t: 0.0 };
        let opts = CnOptions { kinetic: true, leak_tolerance: f64::INFINITY };
        let end = cn_evolve_with(&start, grid, params, t, &opts, |_| Ok(()))?;
        Ok(interpolate(&end, grid, x_f))
    };
    let (s1, s2) = widths;
    let (g1, g2) = (evolve(s1)?, evolve(s2)?);
    // G(s) = G0 + c s² + O(s⁴)
    Ok((g2 * (s1 * s1) - g1 * (s2 * s2)) / (s1 * s1 - s2 * s2))
}

/// Cubic Lagrange interpolation of ψ at `x`.
pub fn interpolate(state: &GridState, grid: &Grid, x: f64) -> Complex64 {
    let dx = grid.dx();
    let u = (x - grid.x_min) / dx;
    let j = (u.floor() as isize).clamp(1, grid.n_points as isize - 3) as usize;
    let f = u - j as f64;
    let nodes = [-1.0, 0.0, 1.0, 2.0];
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, &xa) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (b, &xb) in nodes.iter().enumerate() {
            if a != b {
                w *= (f - xb) / (xa - xb);
            }
        }
        acc += state.psi[j + a - 1] * w;
    }
    acc
}
