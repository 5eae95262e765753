//! Physical parameters of the quartic oscillator
//! `H = p²/2m + m ω²(t) x²/2 + λ(t) x⁴/4`, its truncated-basis operator
//! matrices and the scalar Gaussian decoupling identity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// A time-dependent coefficient such as ω²(t) or λ(t).
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `amplitude · sin²(t)`
    SinSquared(f64),
    /// Piecewise-linear interpolation through `(times[i], values[i])`.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Schedule {
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(invalid("tabulated schedule needs >= 2 matching times/values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated schedule times must be strictly increasing"));
        }
        Ok(Schedule::Tabulated { times, values })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }

    /// Value of the constant schedule, `None` otherwise.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Schedule::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Upper end of the domain (infinite except for tables).
    pub fn t_max(&self) -> f64 {
        match self {
            Schedule::Tabulated { times, .. } => *times.last().unwrap(),
            _ => f64::INFINITY,
        }
    }
}

pub fn eval_schedule(s: &Schedule, t: f64) -> Result<f64> {
    match s {
        Schedule::Constant(c) => Ok(*c),
        Schedule::SinSquared(amp) => {
            let st = t.sin();
            Ok(amp * st * st)
        }
        Schedule::Tabulated { times, values } => {
            let (first, last) = (times[0], times[times.len() - 1]);
            if !(t >= first && t <= last) {
                return Err(Error::OutOfDomain { t });
            }
            let hi = times.partition_point(|&x| x < t).max(1);
            let lo = hi - 1;
            let w = (t - times[lo]) / (times[hi] - times[lo]);
            Ok(values[lo] + w * (values[hi] - values[lo]))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
    pub hbar: f64,
    pub omega_sq: Schedule,
    pub lambda: Schedule,
}

impl ModelParams {
    /// Time-independent oscillator with ħ = 1.
    pub fn new(mass: f64, omega: f64, lambda: f64) -> Self {
        Self {
            mass,
            hbar: 1.0,
            omega_sq: Schedule::Constant(omega * omega),
            lambda: Schedule::Constant(lambda),
        }
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_schedules(mut self, omega_sq: Schedule, lambda: Schedule) -> Self {
        self.omega_sq = omega_sq;
        self.lambda = lambda;
        self
    }

    /// Checks `m > 0`, `ħ > 0` and `λ(t) ≥ 0`, `ω²(t)` finite at the sampled times.
    pub fn validate(&self, sample_times: &[f64]) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(invalid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar > 0.0) {
            return Err(invalid(format!("hbar must be positive, got {}", self.hbar)));
        }
        for &t in sample_times {
            let lam = eval_schedule(&self.lambda, t)?;
            if !(lam >= 0.0) {
                return Err(invalid(format!("lambda({t}) = {lam} is negative")));
            }
            let w2 = eval_schedule(&self.omega_sq, t)?;
            if !w2.is_finite() {
                return Err(invalid(format!("omega^2({t}) is not finite")));
            }
        }
        Ok(())
    }

    pub fn omega_sq_at(&self, t: f64) -> Result<f64> {
        eval_schedule(&self.omega_sq, t)
    }

    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        eval_schedule(&self.lambda, t)
    }

    pub fn is_time_independent(&self) -> bool {
        self.omega_sq.is_constant() && self.lambda.is_constant()
    }

    /// ω for a constant, non-negative ω² schedule.
    pub fn omega(&self) -> Result<f64> {
        match self.omega_sq.constant_value() {
            Some(w2) if w2 >= 0.0 => Ok(w2.sqrt()),
            _ => Err(invalid("a constant, non-negative omega^2 is required")),
        }
    }

    /// λ for a constant schedule.
    pub fn lambda_const(&self) -> Result<f64> {
        self.lambda
            .constant_value()
            .ok_or_else(|| invalid("a constant lambda is required"))
    }

    /// `V(x) = m ω² x²/2 + λ x⁴/4` at time `t`.
    pub fn potential(&self, x: f64, t: f64) -> Result<f64> {
        let w2 = self.omega_sq_at(t)?;
        let lam = self.lambda_at(t)?;
        let x2 = x * x;
        Ok(0.5 * self.mass * w2 * x2 + 0.25 * lam * x2 * x2)
    }

    /// Harmonic-oscillator length `x₀ = (ħ/mω)^{1/2}`.
    pub fn oscillator_length(&self) -> Result<f64> {
        Ok((self.hbar / (self.mass * self.omega()?)).sqrt())
    }
}

/// Scalar check of the Gaussian decoupling identity
/// `exp(-i τ λ x⁴/4ħ) = √(τ/(iλħπ)) ∫ dφ exp[iτ(φ²/λ - x²φ)/ħ]`.
///
/// The oscillatory integral is damped by `exp(-εφ²)` for
/// ε ∈ {1e-2, 1e-3, 1e-4}, each evaluated by composite Simpson on
/// `[-cutoff, cutoff]` and then extrapolated to ε = 0.
/// Returns `(lhs, rhs)`.
pub fn hst_scalar_identity(
    x: f64,
    tau: f64,
    lam: f64,
    hbar: f64,
    cutoff: f64,
    n_quad: usize,
) -> Result<(Complex64, Complex64)> {
    if !(lam > 0.0 && tau > 0.0 && cutoff > 0.0 && hbar > 0.0) {
        return Err(invalid("hst identity needs lam, tau, hbar, cutoff > 0"));
    }
    if n_quad < 1000 {
        return Err(invalid("hst identity needs n_quad >= 1000"));
    }
    let lhs = Complex64::from_polar(1.0, -tau * lam * x.powi(4) / (4.0 * hbar));

    let sqrt_i = Complex64::from_polar(1.0, PI / 4.0);
    let prefactor = (tau / (lam * hbar * PI)).sqrt() / sqrt_i;
    let x2 = x * x;
    let integrand = |phi: f64, eps: f64| {
        let phase = tau * (phi * phi / lam - x2 * phi) / hbar;
        Complex64::from_polar((-eps * phi * phi).exp(), phase)
    };

    let epsilons = [1e-2, 1e-3, 1e-4];
    let mut values = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let coarse = simpson(|p| integrand(p, eps), -cutoff, cutoff, n_quad);
        let fine = simpson(|p| integrand(p, eps), -cutoff, cutoff, 2 * n_quad);
        let change = ((coarse - fine) * prefactor).norm();
        if change > 1e-6 {
            return Err(Error::Numerical(format!(
                "damped quadrature at eps={eps} not converged (change {change:.3e})"
            )));
        }
        values.push(fine * prefactor);
    }
    let rhs = neville_at_zero(&epsilons, &values);
    Ok((lhs, rhs))
}

/// Composite Simpson rule with `n` (rounded up to even) intervals.
pub(crate) fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Polynomial extrapolation of `(xs, ys)` to x = 0.
fn neville_at_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (p[i] * xj - p[i + 1] * xi) / (xj - xi);
        }
    }
    p[0]
}

/// Dense operator matrices in the truncated harmonic-oscillator eigenbasis.
///
/// Quadratic and quartic operators (`x²`, `p²`, `{x,p}`, `x⁴`) are the exact
/// projections of the untruncated operators; only `x` and `p` themselves are
/// plain truncations, so `[x, p] = iħ` fails on the last row/column.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub dim: usize,
    pub basis_frequency: f64,
    pub x: DMatrix<Complex64>,
    pub p: DMatrix<Complex64>,
    pub x2: DMatrix<Complex64>,
    pub p2: DMatrix<Complex64>,
    pub x4: DMatrix<Complex64>,
    pub s_plus: DMatrix<Complex64>,
    pub s_z: DMatrix<Complex64>,
    pub s_minus: DMatrix<Complex64>,
    /// Ĥ assembled at `t = 0`.
    pub hamiltonian: DMatrix<Complex64>,
}

pub fn build_operators(dim: usize, params: &ModelParams, basis_frequency: f64) -> Result<OperatorSet> {
    build_operators_at(dim, params, basis_frequency, 0.0)
}

/// Like [`build_operators`] with Ĥ evaluated at time `t`.
pub fn build_operators_at(
    dim: usize,
    params: &ModelParams,
    basis_frequency: f64,
    t: f64,
) -> Result<OperatorSet> {
    if dim < 2 {
        return Err(invalid("operator basis needs dim >= 2"));
    }
    if !(basis_frequency > 0.0) {
        return Err(invalid("basis frequency must be positive"));
    }
    params.validate(&[t])?;
    let hbar = params.hbar;
    let m = params.mass;
    let padded = dim + 4;

    let mut a = DMatrix::<Complex64>::zeros(padded, padded);
    for n in 1..padded {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    let x_scale = (hbar / (2.0 * m * basis_frequency)).sqrt();
    let p_scale = (hbar * m * basis_frequency / 2.0).sqrt();
    let x_full = (&a + &a_dag) * Complex64::new(x_scale, 0.0);
    let p_full = (&a_dag - &a) * Complex64::new(0.0, p_scale);

    let x2_full = &x_full * &x_full;
    let p2_full = &p_full * &p_full;
    let x4_full = &x2_full * &x2_full;
    let anti = &x_full * &p_full + &p_full * &x_full;

    let cut = |m: &DMatrix<Complex64>| m.view((0, 0), (dim, dim)).into_owned();
    let x = cut(&x_full);
    let p = cut(&p_full);
    let x2 = cut(&x2_full);
    let p2 = cut(&p2_full);
    let x4 = cut(&x4_full);
    let s_plus = &x2 * Complex64::new(0.5 / hbar, 0.0);
    let s_minus = &p2 * Complex64::new(0.5 / hbar, 0.0);
    let s_z = cut(&anti) * Complex64::new(0.0, 0.25 / hbar);

    let w2 = params.omega_sq_at(t)?;
    let lam = params.lambda_at(t)?;
    let hamiltonian = &p2 * Complex64::new(0.5 / m, 0.0)
        + &x2 * Complex64::new(0.5 * m * w2, 0.0)
        + &x4 * Complex64::new(0.25 * lam, 0.0);

    Ok(OperatorSet {
        dim,
        basis_frequency,
        x,
        p,
        x2,
        p2,
        x4,
        s_plus,
        s_z,
        s_minus,
        hamiltonian,
    })
}

/// Real symmetric Ĥ at time `t` in the harmonic basis of frequency
/// `basis_frequency`, assembled from the banded ladder elements of x² and
/// p² (x⁴ exactly projected). Cheap enough for dims in the thousands.
pub fn hamiltonian_real(
    dim: usize,
    params: &ModelParams,
    basis_frequency: f64,
    t: f64,
) -> Result<DMatrix<f64>> {
    if dim < 2 {
        return Err(invalid("operator basis needs dim >= 2"));
    }
    if !(basis_frequency > 0.0) {
        return Err(invalid("basis frequency must be positive"));
    }
    params.validate(&[t])?;
    let (hbar, m) = (params.hbar, params.mass);
    let xs = hbar / (2.0 * m * basis_frequency);
    let ps = hbar * m * basis_frequency / 2.0;
    // (a + a†)² and -(a† - a)² share the diagonal, differ in the off band
    let q2 = |i: usize, j: usize| -> f64 {
        if i == j {
            (2 * i + 1) as f64
        } else if i.abs_diff(j) == 2 {
            let n = i.min(j) as f64;
            ((n + 1.0) * (n + 2.0)).sqrt()
        } else {
            0.0
        }
    };
    let w2 = params.omega_sq_at(t)?;
    let lam = params.lambda_at(t)?;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i.saturating_sub(4)..(i + 5).min(dim) {
            let mut v = 0.0;
            if i.abs_diff(j) <= 2 {
                let diag = if i == j { 1.0 } else { -1.0 };
                let band = q2(i, j);
                v += 0.5 * m * w2 * xs * band;
                v += 0.5 / m * ps * band * diag;
            }
            let mut x4 = 0.0;
            for k in i.saturating_sub(2)..=i + 2 {
                if k.abs_diff(j) <= 2 {
                    x4 += q2(i, k) * q2(k, j);
                }
            }
            v += 0.25 * lam * xs * xs * x4;
            h[(i, j)] = v;
        }
    }
    Ok(h)
}

/// `AB - BA`.
pub fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b - b * a
}

/// Largest entry magnitude of `m` restricted to the leading `n × n` block.
pub fn max_abs_block(m: &DMatrix<Complex64>, n: usize) -> f64 {
    let mut best = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            best = best.max(m[(j, k)].norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constant_schedule_is_flat() {
        assert_eq!(eval_schedule(&Schedule::Constant(1.0), 7.3).unwrap(), 1.0);
    }

    #[test]
    fn sin_squared_schedule() {
        let v = eval_schedule(&Schedule::SinSquared(1.0), PI / 2.0).unwrap();
        assert!(close(v, 1.0, 1e-15));
        assert_eq!(eval_schedule(&Schedule::SinSquared(0.2), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_schedule_interpolates_and_rejects_outside() {
        let s = Schedule::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert!(close(eval_schedule(&s, 0.5).unwrap(), 1.0, 1e-15));
        assert!(close(eval_schedule(&s, 2.0).unwrap(), 1.0, 1e-15));
        assert!(close(eval_schedule(&s, 3.0).unwrap(), 0.0, 1e-15));
        assert!(matches!(eval_schedule(&s, 3.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(eval_schedule(&s, -0.1), Err(Error::OutOfDomain { .. })));
        assert!(Schedule::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn params_reject_negative_lambda() {
        let p = ModelParams::new(1.0, 1.0, 0.1)
            .with_schedules(Schedule::Constant(1.0), Schedule::tabulated(vec![0.0, 1.0], vec![0.1, -0.1]).unwrap());
        assert!(p.validate(&[0.0]).is_ok());
        assert!(p.validate(&[0.0, 1.0]).is_err());
        assert!(ModelParams::new(0.0, 1.0, 0.1).validate(&[]).is_err());
    }

    #[test]
    fn ground_state_x2() {
        let ops = build_operators(2, &ModelParams::new(1.0, 1.0, 0.0), 1.0).unwrap();
        assert!(close(ops.x2[(0, 0)].re, 0.5, 1e-15));
    }

    #[test]
    fn canonical_commutator_in_bulk() {
        let ops = build_operators(30, &ModelParams::new(1.0, 1.0, 0.0), 1.0).unwrap();
        let mut c = commutator(&ops.x, &ops.p);
        for j in 0..30 {
            c[(j, j)] -= Complex64::new(0.0, 1.0);
        }
        assert!(max_abs_block(&c, 28) < 1e-12);
        // the truncation corner is corrupted
        assert!(c[(29, 29)].norm() > 1.0);
    }

    #[test]
    fn harmonic_spectrum() {
        let ops = build_operators(30, &ModelParams::new(1.0, 1.0, 0.0), 1.0).unwrap();
        let h = ops.hamiltonian.map(|z| z.re);
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (n, e) in ev.iter().take(28).enumerate() {
            assert!(close(*e, n as f64 + 0.5, 1e-10), "level {n}: {e}");
        }
    }

    #[test]
    fn su2_algebra_in_bulk() {
        for dim in [4usize, 9, 20] {
            let params = ModelParams::new(1.3, 0.7, 0.2).with_hbar(0.8);
            let ops = build_operators(dim, &params, 1.1).unwrap();
            let bulk = dim - 2;
            let c1 = commutator(&ops.s_plus, &ops.s_minus) - &ops.s_z * Complex64::new(2.0, 0.0);
            let c2 = commutator(&ops.s_z, &ops.s_plus) - &ops.s_plus;
            let c3 = commutator(&ops.s_z, &ops.s_minus) + &ops.s_minus;
            assert!(max_abs_block(&c1, bulk) < 1e-10, "dim {dim}");
            assert!(max_abs_block(&c2, bulk) < 1e-10, "dim {dim}");
            assert!(max_abs_block(&c3, bulk) < 1e-10, "dim {dim}");
        }
    }

    #[test]
    fn quadratic_operators_are_hermitian() {
        let ops = build_operators(12, &ModelParams::new(1.0, 1.0, 0.3), 1.0).unwrap();
        for m in [&ops.x, &ops.p, &ops.s_plus, &ops.s_minus, &ops.hamiltonian] {
            assert!((m - m.adjoint()).norm() < 1e-12);
        }
        // Sᶻ = i{x,p}/4ħ is anti-Hermitian
        assert!((&ops.s_z + ops.s_z.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn hst_identity_trivial_at_origin() {
        let (lhs, rhs) = hst_scalar_identity(0.0, 0.1, 0.2, 1.0, 300.0, 400_000).unwrap();
        assert_eq!(lhs, Complex64::new(1.0, 0.0));
        assert!((rhs - lhs).norm() < 1e-4);
    }

    #[test]
    fn hst_identity_holds() {
        for (tau, lam) in [(0.1, 0.2), (0.05, 0.1)] {
            let (lhs, rhs) = hst_scalar_identity(1.0, tau, lam, 1.0, 300.0, 400_000).unwrap();
            let expected = Complex64::from_polar(1.0, -tau * lam / 4.0);
            assert!((lhs - expected).norm() < 1e-15);
            assert!((rhs - lhs).norm() < 1e-4, "tau={tau} lam={lam}: {rhs} vs {lhs}");
        }
    }

    #[test]
    fn hst_identity_rejects_bad_input() {
        assert!(hst_scalar_identity(1.0, 0.1, 0.0, 1.0, 10.0, 1000).is_err());
        assert!(hst_scalar_identity(1.0, 0.1, 0.2, 1.0, 10.0, 10).is_err());
    }

    #[test]
    fn hst_quadrature_failure_is_reported() {
        // far too few nodes for the oscillation at this cutoff
        let r = hst_scalar_identity(1.0, 0.1, 0.2, 1.0, 300.0, 1000);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
