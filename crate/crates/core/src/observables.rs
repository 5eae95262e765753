//! Per-trajectory moment and propagator integrands and the Monte Carlo
//! averaging engine.
//!
//! Moment integrands use the forward state `(α, β, γ)` and the conjugated
//! backward state `(ᾱ, β̄, γ̄)` through `Γ = γ + γ̄`, `Δ = μβ − μ*β̄` and
//! `A = μ²α + μ*²ᾱ`, with `μ = k − ia/σ²`. All moment estimators work in
//! units with ħ = 1.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::disentangle::{
    continuous_sqrt, integrate_pair, noise_rng, step_xi, AbgState, Direction, FrequencyDriver,
    XiState, SQRT_I,
};
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::stats::RunningStats;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Trajectories per deterministic work unit.
const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPacket {
    pub sigma: f64,
    pub a: f64,
    pub k: f64,
}

impl GaussianPacket {
    pub fn new(sigma: f64, a: f64, k: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("packet width sigma must be positive, got {sigma}")));
        }
        if !(a.is_finite() && k.is_finite()) {
            return Err(invalid("packet centre must be finite"));
        }
        Ok(Self { sigma, a, k })
    }

    /// Generalized initial momentum `μ = k − ia/σ²`.
    pub fn mu(&self) -> Complex64 {
        Complex64::new(self.k, -self.a / (self.sigma * self.sigma))
    }

    /// `ψ(x) = (πσ²)^{-1/4} exp[−(x−a)²/2σ² + ikx]`.
    pub fn wavefunction(&self, x: f64) -> Complex64 {
        let s2 = self.sigma * self.sigma;
        let norm = (std::f64::consts::PI * s2).powf(-0.25);
        let d = x - self.a;
        Complex64::from_polar(norm * (-d * d / (2.0 * s2)).exp(), self.k * x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Position,
    Momentum,
}

impl Which {
    pub fn label(self) -> &'static str {
        match self {
            Which::Position => "x",
            Which::Momentum => "p",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxVars {
    pub gamma_sum: Complex64,
    pub delta: Complex64,
    pub a_sum: Complex64,
}

pub fn aux_vars(fwd: &AbgState, bwd: &AbgState, packet: &GaussianPacket) -> AuxVars {
    let mu = packet.mu();
    let mu_c = mu.conj();
    AuxVars {
        gamma_sum: fwd.gamma + bwd.gamma,
        delta: mu * fwd.beta - mu_c * bwd.beta,
        a_sum: mu * mu * fwd.alpha + mu_c * mu_c * bwd.alpha,
    }
}

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, z: Complex64) -> Complex64 {
    let mut h0 = Complex64::new(1.0, 0.0);
    if n == 0 {
        return h0;
    }
    let mut h1 = z * 2.0;
    for j in 1..n {
        let h2 = z * 2.0 * h1 - h0 * (2.0 * j as f64);
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// One-pair integrand of `⟨xⁿ⟩`; `None` marks an excluded sample
/// (`Re Γ ≤ 0` or a non-finite value).
pub fn x_moment_sample(
    n: usize,
    fwd: &AbgState,
    bwd: &AbgState,
    packet: &GaussianPacket,
) -> Option<Complex64> {
    let aux = aux_vars(fwd, bwd, packet);
    if !(aux.gamma_sum.re > 0.0) {
        return None;
    }
    let s2 = packet.sigma * packet.sigma;
    let root = (aux.gamma_sum * 2.0).sqrt();
    let amp = fwd.branch_sqrt_beta() * bwd.branch_sqrt_beta();
    let pref = amp * I.powu(n as u32) * (2.0 * packet.sigma) / root.powu(n as u32 + 1);
    let arg = aux.delta * s2 / root;
    let expo = -s2 * packet.k * packet.k
        + (aux.a_sum - aux.delta * aux.delta / aux.gamma_sum) * (0.5 * s2 * s2);
    let v = pref * hermite(n, arg) * expo.exp();
    v.is_finite().then_some(v)
}

/// Momentum-space image of a trajectory pair: `γ → 1/γ`, `β → −iβ/γ`,
/// `α → α − β²/γ` on the forward side and the conjugate map on the
/// backward side.
pub fn momentum_substitution(fwd: &AbgState, bwd: &AbgState) -> Option<(AbgState, AbgState)> {
    if fwd.gamma.norm() < 1e-300 || bwd.gamma.norm() < 1e-300 {
        return None;
    }
    let f = AbgState {
        alpha: fwd.alpha - fwd.beta * fwd.beta / fwd.gamma,
        beta: -I * fwd.beta / fwd.gamma,
        gamma: 1.0 / fwd.gamma,
        sqrt_beta: fwd.branch_sqrt_beta() / fwd.gamma.sqrt() * SQRT_I.conj(),
        t: fwd.t,
    };
    let b = AbgState {
        alpha: bwd.alpha - bwd.beta * bwd.beta / bwd.gamma,
        beta: I * bwd.beta / bwd.gamma,
        gamma: 1.0 / bwd.gamma,
        sqrt_beta: bwd.branch_sqrt_beta() / bwd.gamma.sqrt() * SQRT_I,
        t: bwd.t,
    };
    Some((f, b))
}

/// One-pair integrand of `⟨pⁿ⟩`, evaluated as the position integrand of
/// the substituted pair.
pub fn p_moment_sample(
    n: usize,
    fwd: &AbgState,
    bwd: &AbgState,
    packet: &GaussianPacket,
) -> Option<Complex64> {
    let (f, b) = momentum_substitution(fwd, bwd)?;
    x_moment_sample(n, &f, &b, packet)
}

pub fn moment_sample(
    n: usize,
    which: Which,
    fwd: &AbgState,
    bwd: &AbgState,
    packet: &GaussianPacket,
) -> Option<Complex64> {
    match which {
        Which::Position => x_moment_sample(n, fwd, bwd, packet),
        Which::Momentum => p_moment_sample(n, fwd, bwd, packet),
    }
}

/// Closed-form moments of the harmonic oscillator (λ ≡ 0, constant ω).
pub fn harmonic_moment(
    n: usize,
    which: Which,
    t: f64,
    packet: &GaussianPacket,
    params: &ModelParams,
) -> Result<f64> {
    if params.lambda.constant_value() != Some(0.0) {
        return Err(invalid("harmonic moments require lambda = 0"));
    }
    let omega = params.omega()?;
    if !(omega > 0.0) {
        return Err(invalid("harmonic moments require omega > 0"));
    }
    let x02 = 1.0 / (params.mass * omega);
    let (c, s) = ((omega * t).cos(), (omega * t).sin());
    let GaussianPacket { sigma, a, k } = *packet;
    let s4 = sigma.powi(4);
    let (scale, width2, centre) = match which {
        Which::Position => (
            1.0 / (2.0 * sigma),
            s4 * c * c + x02 * x02 * s * s,
            a * c + k * x02 * s,
        ),
        Which::Momentum => (
            1.0 / (2.0 * x02 * sigma),
            x02 * x02 * c * c + s4 * s * s,
            k * x02 * c - a * s,
        ),
    };
    let width = width2.sqrt();
    let z = Complex64::new(0.0, -sigma * centre / width);
    let v = (I * scale).powu(n as u32) * width.powi(n as i32) * hermite(n, z);
    debug_assert!(v.im.abs() <= 1e-12 * v.re.abs().max(1.0));
    Ok(v.re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
    pub imag: f64,
    pub imag_std_error: f64,
    pub n_samples: u64,
    pub n_excluded: u64,
}

impl MomentEstimate {
    fn from_stats(t: f64, re: &RunningStats, im: &RunningStats, excluded: u64) -> Result<Self> {
        if re.count() == 0 {
            return Err(Error::Estimation(format!("no surviving trajectories at t = {t}")));
        }
        Ok(Self {
            t,
            value: re.mean(),
            std_error: re.std_error(),
            imag: im.mean(),
            imag_std_error: im.std_error(),
            n_samples: re.count(),
            n_excluded: excluded,
        })
    }

    /// Fraction of trajectories still contributing.
    pub fn surviving_fraction(&self) -> f64 {
        self.n_samples as f64 / (self.n_samples + self.n_excluded) as f64
    }

    /// Imaginary part consistent with zero at `k` standard errors.
    pub fn imag_consistent(&self, k: f64) -> bool {
        self.imag.abs() <= k * self.imag_std_error + 1e-12
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarlo {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Cell {
    re: RunningStats,
    im: RunningStats,
    excluded: u64,
}

impl Cell {
    fn merge(&mut self, other: &Cell) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
        self.excluded += other.excluded;
    }
}

/// Maps requested times onto integration step indices.
fn step_indices(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                Err(invalid(format!("sample time {t} must be non-negative")))
            } else {
                Ok((t / dt).round() as usize)
            }
        })
        .collect()
}

/// Splits `0..n` into fixed chunks, evaluates each in parallel, and merges
/// the per-chunk results in chunk order.
fn chunked<T, F, M>(n: usize, init: T, eval: F, merge: M) -> Result<T>
where
    T: Send + Clone,
    F: Fn(std::ops::Range<usize>) -> Result<T> + Sync,
    M: Fn(&mut T, &T),
{
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| eval(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();
    let mut acc = init;
    for p in parts {
        merge(&mut acc, &p?);
    }
    Ok(acc)
}

/// Monte Carlo estimates of several moments from one shared set of
/// trajectory pairs. The result is indexed `[observable][time]`.
pub fn estimate_moments(
    params: &ModelParams,
    packet: &GaussianPacket,
    observables: &[(usize, Which)],
    t_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<Vec<Vec<MomentEstimate>>> {
    if mc.n_traj < 2 {
        return Err(invalid("at least two trajectories are required"));
    }
    if !(mc.dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    if params.hbar != 1.0 {
        return Err(invalid("moment estimators work in units with hbar = 1"));
    }
    params.validate(t_grid)?;
    let steps = step_indices(t_grid, mc.dt)?;
    let n_steps = steps.iter().copied().max().unwrap_or(0);
    // step -> grid positions observed at that step
    let mut at_step: Vec<Vec<usize>> = vec![Vec::new(); n_steps + 1];
    for (j, &s) in steps.iter().enumerate() {
        at_step[s].push(j);
    }
    let n_obs = observables.len();
    let n_t = t_grid.len();
    let blank = vec![Cell::default(); n_obs * n_t];

    let cells = chunked(
        mc.n_traj,
        blank.clone(),
        |range| {
            let mut cells = blank.clone();
            for idx in range {
                let mut last_seen = None;
                let out = integrate_pair(
                    params,
                    packet,
                    mc.dt,
                    n_steps,
                    noise_rng(mc.seed, idx as u64, Direction::Forward),
                    noise_rng(mc.seed, idx as u64, Direction::Backward),
                    |k, fwd, bwd| {
                        last_seen = Some(k);
                        for &j in &at_step[k] {
                            for (o, &(n, which)) in observables.iter().enumerate() {
                                let cell = &mut cells[o * n_t + j];
                                match moment_sample(n, which, fwd, bwd, packet) {
                                    Some(v) => {
                                        cell.re.push(v.re);
                                        cell.im.push(v.im);
                                    }
                                    None => cell.excluded += 1,
                                }
                            }
                        }
                    },
                )?;
                if out.blown {
                    let last = last_seen.unwrap_or(0);
                    for (j, &s) in steps.iter().enumerate() {
                        if s > last {
                            for o in 0..n_obs {
                                cells[o * n_t + j].excluded += 1;
                            }
                        }
                    }
                }
            }
            Ok(cells)
        },
        |acc, part| acc.iter_mut().zip(part).for_each(|(a, b)| a.merge(b)),
    )?;

    (0..n_obs)
        .map(|o| {
            (0..n_t)
                .map(|j| {
                    let c = &cells[o * n_t + j];
                    MomentEstimate::from_stats(steps[j] as f64 * mc.dt, &c.re, &c.im, c.excluded)
                })
                .collect()
        })
        .collect()
}

pub fn estimate_moment(
    params: &ModelParams,
    packet: &GaussianPacket,
    n: usize,
    which: Which,
    t_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<Vec<MomentEstimate>> {
    Ok(estimate_moments(params, packet, &[(n, which)], t_grid, mc)?.remove(0))
}

/// Forward or backward state of the commuting limit for a rotated Wiener
/// value `w` with variance `λt/2`: α = β = σ⁻², γ = σ⁻² − ξ⁺.
pub fn commuting_state(w: f64, m_omega_sq: f64, t: f64, sigma: f64) -> AbgState {
    let inv = 1.0 / (sigma * sigma);
    let xi_plus = Complex64::new(0.0, -m_omega_sq * t) - I * SQRT_I * (2.0 * w);
    AbgState {
        alpha: Complex64::new(inv, 0.0),
        beta: Complex64::new(inv, 0.0),
        gamma: Complex64::new(inv, 0.0) - xi_plus,
        sqrt_beta: Complex64::new(1.0 / sigma, 0.0),
        t,
    }
}

/// Commuting-limit (kinetic term dropped) moments sampled from the exact
/// Gaussian law of the rotated Wiener variable. Each sample follows one
/// forward and one backward Wiener path through the sorted `t_grid`.
pub fn estimate_commuting_moments(
    params: &ModelParams,
    packet: &GaussianPacket,
    observables: &[(usize, Which)],
    t_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<MomentEstimate>>> {
    if n_samples < 2 {
        return Err(invalid("at least two samples are required"));
    }
    if params.hbar != 1.0 {
        return Err(invalid("moment estimators work in units with hbar = 1"));
    }
    let m_omega_sq = params.mass
        * params
            .omega_sq
            .constant_value()
            .ok_or_else(|| invalid("commuting limit requires constant omega^2"))?;
    let lam = params.lambda_const()?;
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|&t| !(t >= 0.0)) {
        return Err(invalid("commuting t_grid must be non-negative and sorted"));
    }
    let n_obs = observables.len();
    let n_t = t_grid.len();
    let blank = vec![Cell::default(); n_obs * n_t];
    let cells = chunked(
        n_samples,
        blank.clone(),
        |range| {
            let mut cells = blank.clone();
            for idx in range {
                let mut rf = noise_rng(seed, idx as u64, Direction::Forward);
                let mut rb = noise_rng(seed, idx as u64, Direction::Backward);
                let (mut wf, mut wb, mut t_prev) = (0.0, 0.0, 0.0);
                for (j, &t) in t_grid.iter().enumerate() {
                    let sd = (lam * (t - t_prev) / 2.0).sqrt();
                    let zf: f64 = StandardNormal.sample(&mut rf);
                    let zb: f64 = StandardNormal.sample(&mut rb);
                    wf += sd * zf;
                    wb += sd * zb;
                    t_prev = t;
                    let fwd = commuting_state(wf, m_omega_sq, t, packet.sigma);
                    let bwd = commuting_state(wb, m_omega_sq, t, packet.sigma).conj();
                    for (o, &(n, which)) in observables.iter().enumerate() {
                        let cell = &mut cells[o * n_t + j];
                        match moment_sample(n, which, &fwd, &bwd, packet) {
                            Some(v) => {
                                cell.re.push(v.re);
                                cell.im.push(v.im);
                            }
                            None => cell.excluded += 1,
                        }
                    }
                }
            }
            Ok(cells)
        },
        |acc, part| acc.iter_mut().zip(part).for_each(|(a, b)| a.merge(b)),
    )?;
    (0..n_obs)
        .map(|o| {
            (0..n_t)
                .map(|j| {
                    let c = &cells[o * n_t + j];
                    MomentEstimate::from_stats(t_grid[j], &c.re, &c.im, c.excluded)
                })
                .collect()
        })
        .collect()
}

/// One-trajectory integrand of the propagator
/// `(−2πħξ⁻)^{−1/2} exp[ξᶻ/4 + ξ⁺x_f²/2ħ + (x_f e^{ξᶻ/2} − x_i)²/2ħξ⁻]`.
///
/// `root` selects the branch of `(−2πħξ⁻)^{1/2}`; `None` takes the
/// principal root.
pub fn propagator_sample(
    x_i: f64,
    x_f: f64,
    xi: &XiState,
    hbar: f64,
    root: Option<Complex64>,
) -> Option<Complex64> {
    if xi.xi_minus.norm() < 1e-300 {
        return None;
    }
    let base = -xi.xi_minus * (2.0 * std::f64::consts::PI * hbar);
    let r = match root {
        Some(h) => continuous_sqrt(base, h),
        None => base.sqrt(),
    };
    let d = (xi.xi_z * 0.5).exp() * x_f - x_i;
    let expo = xi.xi_z * 0.25 + xi.xi_plus * (x_f * x_f / (2.0 * hbar)) + d * d / (xi.xi_minus * (2.0 * hbar));
    let v = expo.exp() / r;
    v.is_finite().then_some(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorEstimate {
    pub value: Complex64,
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub n_samples: u64,
    pub n_excluded: u64,
}

/// Monte Carlo propagator `G(x_f, t | x_i, 0)` from single-field ξ
/// trajectories with continuity-tracked square-root branch.
pub fn estimate_propagator(
    params: &ModelParams,
    x_i: f64,
    x_f: f64,
    t: f64,
    mc: &MonteCarlo,
) -> Result<PropagatorEstimate> {
    if mc.n_traj < 2 || !(mc.dt > 0.0) || !(t > 0.0) {
        return Err(invalid("propagator estimate needs n_traj >= 2, dt > 0, t > 0"));
    }
    params.validate(&[t])?;
    let n_steps = (t / mc.dt).round().max(1.0) as usize;
    let two_pi_hbar = 2.0 * std::f64::consts::PI * params.hbar;
    let blank = [Cell::default(), Cell::default()];
    let cells = chunked(
        mc.n_traj,
        blank,
        |range| {
            let mut cells = blank;
            for idx in range {
                let rng = noise_rng(mc.seed, idx as u64, Direction::Forward);
                let mut drive = FrequencyDriver::new(params, rng, mc.dt);
                let mut xi = XiState::initial();
                let mut root: Option<Complex64> = None;
                let mut alive = true;
                for k in 0..n_steps {
                    let w = drive.next(k as f64 * mc.dt)?;
                    match step_xi(&xi, w, params.mass, mc.dt) {
                        Ok(next) => xi = next,
                        Err(_) => {
                            alive = false;
                            break;
                        }
                    }
                    let base = -xi.xi_minus * two_pi_hbar;
                    root = Some(match root {
                        Some(h) => continuous_sqrt(base, h),
                        None => base.sqrt(),
                    });
                }
                let sample = if alive { propagator_sample(x_i, x_f, &xi, params.hbar, root) } else { None };
                match sample {
                    Some(v) => {
                        cells[0].re.push(v.re);
                        cells[1].re.push(v.im);
                    }
                    None => cells[0].excluded += 1,
                }
            }
            Ok(cells)
        },
        |acc, part| {
            acc[0].merge(&part[0]);
            acc[1].merge(&part[1]);
        },
    )?;
    if cells[0].re.count() == 0 {
        return Err(Error::Estimation("every propagator trajectory diverged".into()));
    }
    Ok(PropagatorEstimate {
        value: Complex64::new(cells[0].re.mean(), cells[1].re.mean()),
        std_error_re: cells[0].re.std_error(),
        std_error_im: cells[1].re.std_error(),
        n_samples: cells[0].re.count(),
        n_excluded: cells[0].excluded,
    })
}

/// Harmonic propagator `√(mω/2πiħ sin ωt) exp[imω((x_f²+x_i²)cos ωt − 2x_i x_f)/2ħ sin ωt]`.
pub fn harmonic_propagator(params: &ModelParams, x_i: f64, x_f: f64, t: f64) -> Result<Complex64> {
    let omega = params.omega()?;
    let (m, hbar) = (params.mass, params.hbar);
    let s = (omega * t).sin();
    if s.abs() < 1e-14 {
        return Err(Error::Singularity { t });
    }
    let pref = (Complex64::new(m * omega, 0.0) / (I * 2.0 * std::f64::consts::PI * hbar * s)).sqrt();
    let phase = m * omega * ((x_f * x_f + x_i * x_i) * (omega * t).cos() - 2.0 * x_i * x_f) / (2.0 * hbar * s);
    Ok(pref * Complex64::from_polar(1.0, phase))
}

/// Independent (seeded) normal deviates, used by examples and tests.
pub fn normal_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disentangle::harmonic_xi;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, c(4.0, -2.0)), c(1.0, 0.0));
        assert_eq!(hermite(1, c(3.0, 1.0)), c(6.0, 2.0));
        assert_eq!(hermite(3, c(2.0, 0.0)), c(40.0, 0.0));
    }

    /// Explicit coefficients of H_0..H_10.
    fn hermite_direct(n: usize, z: Complex64) -> Complex64 {
        const COEFFS: [&[f64]; 11] = [
            &[1.0],
            &[0.0, 2.0],
            &[-2.0, 0.0, 4.0],
            &[0.0, -12.0, 0.0, 8.0],
            &[12.0, 0.0, -48.0, 0.0, 16.0],
            &[0.0, 120.0, 0.0, -160.0, 0.0, 32.0],
            &[-120.0, 0.0, 720.0, 0.0, -480.0, 0.0, 64.0],
            &[0.0, -1680.0, 0.0, 3360.0, 0.0, -1344.0, 0.0, 128.0],
            &[1680.0, 0.0, -13440.0, 0.0, 13440.0, 0.0, -3584.0, 0.0, 256.0],
            &[0.0, 30240.0, 0.0, -80640.0, 0.0, 48384.0, 0.0, -9216.0, 0.0, 512.0],
            &[-30240.0, 0.0, 302400.0, 0.0, -403200.0, 0.0, 161280.0, 0.0, -23040.0, 0.0, 1024.0],
        ];
        COEFFS[n].iter().rev().fold(c(0.0, 0.0), |acc, &a| acc * z + a)
    }

    #[test]
    fn hermite_recurrence_matches_expansion() {
        use rand::Rng;
        let mut rng = normal_rng(17);
        for _ in 0..20 {
            let z = c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            for n in 0..=10 {
                let (a, b) = (hermite(n, z), hermite_direct(n, z));
                assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0), "n={n} z={z}");
            }
        }
    }

    #[test]
    fn initial_moments_are_gaussian_cumulants() {
        let p = GaussianPacket::new(0.5, 0.5, 1.0).unwrap();
        let s = AbgState::initial(p.sigma);
        let b = s.conj();
        let x = |n| x_moment_sample(n, &s, &b, &p).unwrap();
        let q = |n| p_moment_sample(n, &s, &b, &p).unwrap();
        assert!((x(0) - c(1.0, 0.0)).norm() < 1e-14);
        assert!((x(1) - c(0.5, 0.0)).norm() < 1e-14);
        assert!((x(2) - c(0.125 + 0.25, 0.0)).norm() < 1e-14);
        assert!((q(0) - c(1.0, 0.0)).norm() < 1e-14);
        assert!((q(1) - c(1.0, 0.0)).norm() < 1e-14);
        assert!((q(2) - c(2.0 + 1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn aux_vars_at_start() {
        let p = GaussianPacket::new(0.8, 0.1, 0.3).unwrap();
        let s = AbgState::initial(0.8);
        let aux = aux_vars(&s, &s.conj(), &p);
        assert!((aux.gamma_sum - c(2.0 / 0.64, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn excluded_when_gamma_sum_not_positive() {
        let p = GaussianPacket::new(1.0, 0.0, 0.0).unwrap();
        let mut s = AbgState::initial(1.0);
        s.gamma = c(-0.5, 0.2);
        assert!(x_moment_sample(0, &s, &s.conj(), &p).is_none());
    }

    #[test]
    fn rejects_bad_packet() {
        assert!(GaussianPacket::new(0.0, 0.0, 0.0).is_err());
        assert!(GaussianPacket::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn harmonic_moment_examples() {
        let params = ModelParams::new(1.0, 1.0, 0.0);
        let p = GaussianPacket::new(1.0, 0.3, -0.7).unwrap();
        for t in [0.0, 0.4, 1.3, 2.9] {
            let centre = 0.3 * f64::cos(t) - 0.7 * f64::sin(t);
            let x1 = harmonic_moment(1, Which::Position, t, &p, &params).unwrap();
            let x2 = harmonic_moment(2, Which::Position, t, &p, &params).unwrap();
            assert!((x1 - centre).abs() < 1e-13);
            assert!((x2 - (0.5 + centre * centre)).abs() < 1e-13);
        }
        let params = ModelParams::new(2.0, 1.5, 0.0);
        let p = GaussianPacket::new(0.6, 0.4, 1.1).unwrap();
        let x02 = 1.0 / 3.0;
        let t = 0.8;
        let x1 = harmonic_moment(1, Which::Position, t, &p, &params).unwrap();
        assert!((x1 - (0.4 * (1.5 * t).cos() + 1.1 * x02 * (1.5 * t).sin())).abs() < 1e-13);
        let p1 = harmonic_moment(1, Which::Momentum, t, &p, &params).unwrap();
        assert!((p1 - (1.1 * (1.5 * t).cos() - 0.4 * 3.0 * (1.5 * t).sin())).abs() < 1e-13);
        assert!((harmonic_moment(1, Which::Position, 0.0, &p, &params).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn closed_form_states_reproduce_harmonic_moments() {
        let params = ModelParams::new(1.3, 0.9, 0.0);
        let p = GaussianPacket::new(0.7, -0.4, 0.6).unwrap();
        for t in [0.2, 0.9, 1.5] {
            let s = AbgState::from_xi(&harmonic_xi(&params, t).unwrap(), p.sigma);
            for n in 0..=4 {
                for which in [Which::Position, Which::Momentum] {
                    let got = moment_sample(n, which, &s, &s.conj(), &p).unwrap();
                    let want = harmonic_moment(n, which, t, &p, &params).unwrap();
                    assert!((got - c(want, 0.0)).norm() < 1e-11 * want.abs().max(1.0), "n={n} {which:?} t={t}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn substitution_rule_is_the_momentum_evaluator(
            gr in 0.1f64..3.0, gi in -2.0f64..2.0,
            br in -2.0f64..2.0, bi in -2.0f64..2.0,
            ar in -2.0f64..2.0, ai in -2.0f64..2.0,
            hr in 0.1f64..3.0, hi in -2.0f64..2.0,
            n in 0usize..5,
        ) {
            let p = GaussianPacket::new(0.7, 0.2, 0.9).unwrap();
            let mk = |a: Complex64, b: Complex64, g: Complex64| AbgState { alpha: a, beta: b, gamma: g, sqrt_beta: b.sqrt(), t: 0.0 };
            let fwd = mk(c(ar, ai), c(br, bi), c(gr, gi));
            let bwd = mk(c(ai, ar), c(bi, br), c(hr, hi));
            let (f2, b2) = momentum_substitution(&fwd, &bwd).unwrap();
            prop_assert!((f2.gamma - 1.0 / fwd.gamma).norm() < 1e-12);
            prop_assert!((f2.beta + I * fwd.beta / fwd.gamma).norm() < 1e-12);
            prop_assert!((f2.alpha - (fwd.alpha - fwd.beta * fwd.beta / fwd.gamma)).norm() < 1e-12);
            prop_assert!((f2.sqrt_beta * f2.sqrt_beta - f2.beta).norm() < 1e-10 * f2.beta.norm().max(1.0));
            let direct = p_moment_sample(n, &fwd, &bwd, &p);
            let via = x_moment_sample(n, &f2, &b2, &p);
            match (direct, via) {
                (Some(a), Some(b)) => prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn harmonic_propagator_from_closed_form_xi() {
        let params = ModelParams::new(1.0, 1.0, 0.0);
        for (xi_, xf, t) in [(0.0, 0.5, 0.5), (0.3, -0.2, 1.2), (-1.0, 0.7, 0.1)] {
            let xi = harmonic_xi(&params, t).unwrap();
            let g = propagator_sample(xi_, xf, &xi, 1.0, None).unwrap();
            let h = harmonic_propagator(&params, xi_, xf, t).unwrap();
            assert!((g - h).norm() < 1e-12 * h.norm());
            let swapped = propagator_sample(xf, xi_, &xi, 1.0, None).unwrap();
            assert!((swapped - g).norm() < 1e-12 * h.norm());
        }
    }

    #[test]
    fn harmonic_estimator_is_exact_and_noiseless() {
        let params = ModelParams::new(1.0, 1.0, 0.0);
        let p = GaussianPacket::new(1.0, 1.0, 0.0).unwrap();
        let mc = MonteCarlo { n_traj: 4, seed: 3, dt: 1e-4 };
        let est = estimate_moment(&params, &p, 2, Which::Position, &[0.0, 1.0, 2.0], &mc).unwrap();
        for e in &est {
            let want = harmonic_moment(2, Which::Position, e.t, &p, &params).unwrap();
            assert!((e.value - want).abs() < 1e-3 * want.abs());
            assert_eq!(e.std_error, 0.0);
            assert_eq!(e.n_samples, 4);
        }
    }

    #[test]
    fn estimator_rejects_single_trajectory() {
        let params = ModelParams::new(1.0, 1.0, 0.0);
        let p = GaussianPacket::new(1.0, 0.0, 0.0).unwrap();
        let mc = MonteCarlo { n_traj: 1, seed: 0, dt: 1e-3 };
        assert!(estimate_moment(&params, &p, 1, Which::Position, &[0.1], &mc).is_err());
    }
}
