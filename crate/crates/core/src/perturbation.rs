//! Dyson series of the quartic evolution operator in a truncated basis.
//!
//! With `Ĥ = Ĥ₀ + λx̂⁴/4` and `Û₀` the harmonic evolution, the n-th order
//! term is
//! `Û⁽ⁿ⁾(t) = (−iλ/4ħ)ⁿ Û₀(t) ∫_{t>tₙ>…>t₁>0} x̂⁴_I(tₙ)…x̂⁴_I(t₁)`,
//! `x̂⁴_I(s) = Û₀†(s) x̂⁴ Û₀(s)`. The basis is the eigenbasis of Ĥ₀, so
//! `Û₀` is diagonal and the truncated algebra is closed: partial sums
//! converge to the exponential of the same truncated Ĥ.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{hamiltonian_real, ModelParams};

/// Gauss–Legendre panels per time axis.
const PANELS: usize = 40;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Composite 5-point Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 5);
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DysonResult {
    pub order: usize,
    pub partial_sum: DMatrix<Complex64>,
    /// Frobenius distance to the exact evolution on the measured sector.
    pub residual_norm: f64,
}

fn check(params: &ModelParams, dim: usize) -> Result<(f64, f64)> {
    if !params.is_time_independent() {
        return Err(invalid("Dyson check needs time-independent coefficients"));
    }
    if dim < 4 {
        return Err(invalid("Dyson check needs dim >= 4"));
    }
    let omega = params.omega()?;
    if !(omega > 0.0) {
        return Err(invalid("Dyson check needs omega > 0"));
    }
    Ok((omega, params.lambda_const()?))
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `exp(−iĤt/ħ)` from the spectral decomposition of the truncated Ĥ.
pub fn u_exact(params: &ModelParams, dim: usize, t: f64) -> Result<DMatrix<Complex64>> {
    let (omega, _) = check(params, dim)?;
    let h = hamiltonian_real(dim, params, omega, 0.0)?;
    let eig = SymmetricEigen::new(h);
    let v = to_complex(&eig.eigenvectors);
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t / params.hbar)));
    Ok(&v * phases * v.adjoint())
}

/// `x̂⁴` in the oscillator basis of frequency ω, exactly projected.
fn x4_matrix(params: &ModelParams, dim: usize, omega: f64) -> Result<DMatrix<f64>> {
    let quartic = ModelParams::new(params.mass, 0.0, 4.0).with_hbar(params.hbar);
    let mut h = hamiltonian_real(dim, &quartic, omega, 0.0)?;
    // strip the kinetic part, leaving x⁴
    let free = ModelParams::new(params.mass, 0.0, 0.0).with_hbar(params.hbar);
    h -= hamiltonian_real(dim, &free, omega, 0.0)?;
    Ok(h)
}

/// Diagonal `Û₀(s)` entries `e^{−iEₙs/ħ}`, `Eₙ = ħω(n + 1/2)`.
fn u0_diag(dim: usize, omega: f64, s: f64) -> Vec<Complex64> {
    (0..dim).map(|n| Complex64::from_polar(1.0, -omega * (n as f64 + 0.5) * s)).collect()
}

/// `x̂⁴_I(s)_{jk} = e^{i(E_j − E_k)s/ħ} x⁴_{jk}`.
fn x4_interaction(x4: &DMatrix<f64>, omega: f64, s: f64) -> DMatrix<Complex64> {
    let dim = x4.nrows();
    DMatrix::from_fn(dim, dim, |j, k| {
        Complex64::from_polar(x4[(j, k)], omega * (j as f64 - k as f64) * s)
    })
}

/// The n-th order Dyson term `Û⁽ⁿ⁾(t)`, `n ≤ 2`.
pub fn dyson_term(params: &ModelParams, dim: usize, t: f64, order: usize) -> Result<DMatrix<Complex64>> {
    let (omega, lam) = check(params, dim)?;
    let u0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(u0_diag(dim, omega, t)));
    if order == 0 {
        return Ok(u0);
    }
    if order > 2 {
        return Err(invalid("Dyson terms are implemented up to order 2"));
    }
    let x4 = x4_matrix(params, dim, omega)?;
    let coupling = Complex64::new(0.0, -lam / (4.0 * params.hbar));
    let outer = gauss_legendre(0.0, t, PANELS);
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    if order == 1 {
        for &(s, w) in &outer {
            acc += x4_interaction(&x4, omega, s) * Complex64::new(w, 0.0);
        }
        return Ok(u0 * acc * coupling);
    }
    // order 2: ∫₀ᵗ dt₂ x⁴_I(t₂) ∫₀^{t₂} dt₁ x⁴_I(t₁)
    for &(t2, w2) in &outer {
        let mut inner = DMatrix::<Complex64>::zeros(dim, dim);
        for &(t1, w1) in &gauss_legendre(0.0, t2, PANELS / 4) {
            inner += x4_interaction(&x4, omega, t1) * Complex64::new(w1, 0.0);
        }
        acc += x4_interaction(&x4, omega, t2) * inner * Complex64::new(w2, 0.0);
    }
    Ok(u0 * acc * (coupling * coupling))
}

/// Frobenius norm of the leading `sector` columns (states evolved from the
/// `sector` lowest basis states).
pub fn sector_norm(m: &DMatrix<Complex64>, sector: usize) -> f64 {
    m.columns(0, sector.min(m.ncols())).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Partial sum up to `order` and its distance to the exact evolution on the
/// lowest `sector` basis states.
pub fn dyson_partial_sum(
    params: &ModelParams,
    dim: usize,
    t: f64,
    order: usize,
    sector: usize,
) -> Result<DysonResult> {
    let exact = u_exact(params, dim, t)?;
    let mut partial = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 0..=order {
        partial += dyson_term(params, dim, t, n)?;
    }
    let residual_norm = sector_norm(&(&exact - &partial), sector);
    Ok(DysonResult { order, partial_sum: partial, residual_norm })
}

/// Least-squares slope of `log residual` against `log λ` after subtracting
/// the partial sum of the given order. Expected `order + 1`.
pub fn residual_scaling(
    params: &ModelParams,
    dim: usize,
    t: f64,
    lambdas: &[f64],
    order: usize,
    sector: usize,
) -> Result<f64> {
    if lambdas.len() < 2 {
        return Err(Error::Accuracy("slope fit needs at least two couplings".into()));
    }
    let (lo, hi) = lambdas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
    if !(lo > 0.0) || hi / lo < 4.0 {
        return Err(invalid("couplings must be positive and span at least a factor 4"));
    }
    let points: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&lam| {
            let p = ModelParams { lambda: crate::model::Schedule::Constant(lam), ..params.clone() };
            let r = dyson_partial_sum(&p, dim, t, order, sector)?.residual_norm;
            Ok((lam.ln(), r.ln()))
        })
        .collect::<Result<_>>()?;
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return Err(Error::Accuracy("degenerate residual fit".into()));
    }
    Ok(slope)
}
