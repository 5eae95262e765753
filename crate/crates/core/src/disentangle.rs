//! Disentanglement variables and their stochastic dynamics.
//!
//! The evolution operator of the quartic oscillator is represented as the
//! noise average of `exp(ξ⁺Ŝ⁺) exp(ξᶻŜᶻ) exp(ξ⁻Ŝ⁻)`, where the complex
//! coefficients obey
//!
//! ```text
//! i dξ⁺/dt + (ξ⁺)²/m = m Ω²(t)
//! i dξᶻ/dt + 2ξ⁺/m   = 0
//! i dξ⁻/dt - e^{ξᶻ}/m = 0
//! ```
//!
//! with the complex effective frequency `Ω²(t) = ω²(t) + 2√(iλ(t)) φ(t)/m`
//! driven by real Gaussian white noise φ of intensity ħ/2, i.e.
//! `E[φ(t)φ(t')] = (ħ/2) δ(t - t')`. For Gaussian wave packets the same
//! dynamics is carried by the better-behaved variables (α, β, γ).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::observables::GaussianPacket;

/// `√i = e^{iπ/4}`.
pub const SQRT_I: Complex64 = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `ω²(t) + 2√(iλ(t)) φ/m`.
pub fn effective_frequency_sq(params: &ModelParams, t: f64, phi: f64) -> Result<Complex64> {
    let w2 = params.omega_sq_at(t)?;
    let lam = params.lambda_at(t)?;
    Ok(Complex64::new(w2, 0.0) + SQRT_I * (2.0 * lam.sqrt() * phi / params.mass))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiState {
    pub xi_plus: Complex64,
    pub xi_z: Complex64,
    pub xi_minus: Complex64,
    pub t: f64,
}

impl XiState {
    pub fn initial() -> Self {
        Self {
            xi_plus: Complex64::new(0.0, 0.0),
            xi_z: Complex64::new(0.0, 0.0),
            xi_minus: Complex64::new(0.0, 0.0),
            t: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.xi_plus.is_finite() && self.xi_z.is_finite() && self.xi_minus.is_finite()
    }
}

/// Wave-packet variables `α = 1/(σ² - ξ⁻)`, `β = e^{ξᶻ/2} α`,
/// `γ = e^{ξᶻ} α - ξ⁺`.
///
/// `sqrt_beta` follows √β continuously along the trajectory; it is the
/// amplitude normalisation of the evolved packet and fixes the branch of
/// √β wherever the principal root would jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbgState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub sqrt_beta: Complex64,
    pub t: f64,
}

impl AbgState {
    pub fn initial(sigma: f64) -> Self {
        let inv = Complex64::new(1.0 / (sigma * sigma), 0.0);
        Self {
            alpha: inv,
            beta: inv,
            gamma: inv,
            sqrt_beta: Complex64::new(1.0 / sigma, 0.0),
            t: 0.0,
        }
    }

    /// Maps ξ variables onto (α, β, γ) for a packet of width σ.
    pub fn from_xi(xi: &XiState, sigma: f64) -> Self {
        let alpha = 1.0 / (Complex64::new(sigma * sigma, 0.0) - xi.xi_minus);
        let half = (xi.xi_z * 0.5).exp();
        let beta = half * alpha;
        Self {
            alpha,
            beta,
            gamma: half * half * alpha - xi.xi_plus,
            sqrt_beta: beta.sqrt(),
            t: xi.t,
        }
    }

    /// Complex conjugate of every variable: the backward (bra) partner of a
    /// trajectory integrated with the forward equations.
    pub fn conj(&self) -> Self {
        Self {
            alpha: self.alpha.conj(),
            beta: self.beta.conj(),
            gamma: self.gamma.conj(),
            sqrt_beta: self.sqrt_beta.conj(),
            t: self.t,
        }
    }

    /// √β on the branch selected by `sqrt_beta`.
    pub fn branch_sqrt_beta(&self) -> Complex64 {
        continuous_sqrt(self.beta, self.sqrt_beta)
    }

    fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()
    }
}

/// Square root of `z` on the branch nearest to `reference`.
pub fn continuous_sqrt(z: Complex64, reference: Complex64) -> Complex64 {
    let r = z.sqrt();
    if (r - reference).norm_sqr() <= (r + reference).norm_sqr() {
        r
    } else {
        -r
    }
}

/// One explicit Euler step of the ξ equations, all right-hand sides
/// evaluated at the left endpoint.
pub fn step_xi(state: &XiState, omega_sq_eff: Complex64, m: f64, dt: f64) -> Result<XiState> {
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let XiState { xi_plus, xi_z, xi_minus, t } = *state;
    let next = XiState {
        xi_plus: xi_plus - I * dt * (omega_sq_eff * m - xi_plus * xi_plus / m),
        xi_z: xi_z + I * dt * (xi_plus * (2.0 / m)),
        xi_minus: xi_minus - I * dt * (xi_z.exp() / m),
        t: t + dt,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Numerical(format!("xi trajectory diverged at t = {}", next.t)))
    }
}

/// One explicit Euler step of `i dγ/dt = γ²/m - mΩ²`, `i dβ/dt = βγ/m`,
/// `i dα/dt = β²/m`, updated in the order γ, β, α from left-endpoint values.
pub fn step_abg(state: &AbgState, omega_sq_eff: Complex64, m: f64, dt: f64) -> Result<AbgState> {
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let next = euler_abg(state, omega_sq_eff, 1.0 / m, m, dt);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Numerical(format!("(alpha, beta, gamma) diverged at t = {}", next.t)))
    }
}

#[inline(always)]
fn euler_abg(s: &AbgState, omega_sq_eff: Complex64, inv_m: f64, m: f64, dt: f64) -> AbgState {
    let g = s.gamma;
    let b = s.beta;
    let mi_dt = Complex64::new(0.0, -dt * inv_m);
    AbgState {
        gamma: g + mi_dt * (g * g - omega_sq_eff * (m * m)),
        beta: b + mi_dt * (b * g),
        alpha: s.alpha + mi_dt * (b * b),
        sqrt_beta: s.sqrt_beta + mi_dt * 0.5 * (s.sqrt_beta * g),
        t: s.t + dt,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub trajectory_index: u64,
}

/// Which of the two independent noise fields a stream drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Deterministic per-trajectory RNG stream derived from `(seed, index, direction)`.
pub fn noise_rng(seed: u64, trajectory_index: u64, direction: Direction) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = match direction {
        Direction::Forward => 0,
        Direction::Backward => 1,
    };
    rng.set_stream(trajectory_index.wrapping_mul(2).wrapping_add(lane));
    rng
}

/// Standard deviation of the per-step field value φ_k for step `dt`.
pub fn field_std(hbar: f64, dt: f64) -> f64 {
    (hbar / (2.0 * dt)).sqrt()
}

/// Draws the noise sequence of one field and produces Ω²(t_k) step by step.
///
/// No random numbers are consumed when λ is identically zero.
pub struct FrequencyDriver<'a, R: Rng> {
    params: &'a ModelParams,
    rng: R,
    dt: f64,
    phi_std: f64,
    noiseless: bool,
    constant: Option<(f64, f64)>,
}

impl<'a, R: Rng> FrequencyDriver<'a, R> {
    pub fn new(params: &'a ModelParams, rng: R, dt: f64) -> Self {
        let noiseless = params.lambda.constant_value() == Some(0.0);
        let constant = match (params.omega_sq.constant_value(), params.lambda.constant_value()) {
            (Some(w2), Some(lam)) => Some((w2, 2.0 * lam.sqrt() / params.mass)),
            _ => None,
        };
        Self {
            params,
            rng,
            dt,
            phi_std: field_std(params.hbar, dt),
            noiseless,
            constant,
        }
    }

    /// Ω² for the step starting at `t`.
    #[inline]
    pub fn next(&mut self, t: f64) -> Result<Complex64> {
        let phi = if self.noiseless {
            0.0
        } else {
            let z: f64 = self.rng.sample(StandardNormal);
            z * self.phi_std
        };
        match self.constant {
            Some((w2, coupling)) => Ok(Complex64::new(w2, 0.0) + SQRT_I * (coupling * phi)),
            None => effective_frequency_sq(self.params, t, phi),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryOutcome {
    pub forward: AbgState,
    /// Complex conjugate of the (α, β, γ) driven by the backward field.
    pub backward: AbgState,
    pub blown: bool,
    /// First time Re γ or Re γ̄ dropped to zero or below.
    pub t_gamma: Option<f64>,
}

/// Integrates a forward/backward trajectory pair, calling `observe` with the
/// states after every step `k` (time `k·dt`, `k = 1..=n_steps`) and once for
/// `k = 0`. Integration stops at the first step with `Re γ ≤ 0` on either side.
pub fn integrate_pair<R1, R2, F>(
    params: &ModelParams,
    packet: &GaussianPacket,
    dt: f64,
    n_steps: usize,
    forward_rng: R1,
    backward_rng: R2,
    mut observe: F,
) -> Result<TrajectoryOutcome>
where
    R1: Rng,
    R2: Rng,
    F: FnMut(usize, &AbgState, &AbgState),
{
    if !(packet.sigma > 0.0) {
        return Err(invalid("packet width must be positive"));
    }
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let m = params.mass;
    let inv_m = 1.0 / m;
    let mut fwd_drive = FrequencyDriver::new(params, forward_rng, dt);
    let mut bwd_drive = FrequencyDriver::new(params, backward_rng, dt);
    let mut fwd = AbgState::initial(packet.sigma);
    // integrated with the forward equations, conjugated on output
    let mut bwd = AbgState::initial(packet.sigma);
    observe(0, &fwd, &bwd.conj());

    for k in 1..=n_steps {
        let t = (k - 1) as f64 * dt;
        let w_f = fwd_drive.next(t)?;
        let w_b = bwd_drive.next(t)?;
        fwd = euler_abg(&fwd, w_f, inv_m, m, dt);
        bwd = euler_abg(&bwd, w_b, inv_m, m, dt);
        fwd.t = k as f64 * dt;
        bwd.t = fwd.t;
        if !(fwd.gamma.re > 0.0 && bwd.gamma.re > 0.0) || !fwd.is_finite() || !bwd.is_finite() {
            return Ok(TrajectoryOutcome {
                forward: fwd,
                backward: bwd.conj(),
                blown: true,
                t_gamma: Some(fwd.t),
            });
        }
        observe(k, &fwd, &bwd.conj());
    }
    Ok(TrajectoryOutcome {
        forward: fwd,
        backward: bwd.conj(),
        blown: false,
        t_gamma: None,
    })
}

/// Integrates the trajectory pair selected by `noise` up to `n_steps·dt`.
pub fn integrate_trajectory(
    params: &ModelParams,
    packet: &GaussianPacket,
    noise: &NoiseConfig,
) -> Result<TrajectoryOutcome> {
    integrate_pair(
        params,
        packet,
        noise.dt,
        noise.n_steps,
        noise_rng(noise.seed, noise.trajectory_index, Direction::Forward),
        noise_rng(noise.seed, noise.trajectory_index, Direction::Backward),
        |_, _, _| {},
    )
}

/// First time `Re γ(t) ≤ 0` for a single (forward) γ path started at
/// `γ(0) = σ⁻²`, or `None` if it survives to `t_max`.
pub fn first_passage_time<R: Rng>(
    params: &ModelParams,
    sigma: f64,
    dt: f64,
    t_max: f64,
    rng: R,
) -> Result<Option<f64>> {
    if !(sigma > 0.0 && dt > 0.0) {
        return Err(invalid("first passage needs sigma > 0 and dt > 0"));
    }
    let m = params.mass;
    let inv_m = 1.0 / m;
    let mut drive = FrequencyDriver::new(params, rng, dt);
    let mut gamma = Complex64::new(1.0 / (sigma * sigma), 0.0);
    let n_steps = (t_max / dt).ceil() as usize;
    for k in 1..=n_steps {
        let w = drive.next((k - 1) as f64 * dt)?;
        gamma -= I * (dt * inv_m) * (gamma * gamma - w * (m * m));
        if !(gamma.re > 0.0) {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstPassageStats {
    /// Observed first-passage times, in trajectory order.
    pub times: Vec<f64>,
    /// Trajectories that survived to `t_max`.
    pub n_censored: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// First-passage statistics of `n_traj` forward/backward pairs, each
/// integrated until `Re γ` or `Re γ̄` reaches zero or `t_max` elapses.
/// Mean and standard deviation are over the observed (uncensored) times.
pub fn first_passage_statistics(
    params: &ModelParams,
    sigma: f64,
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<FirstPassageStats> {
    use rayon::prelude::*;
    if n_traj < 2 {
        return Err(invalid("at least two trajectories are required"));
    }
    if !(t_max > 0.0) {
        return Err(invalid("t_max must be positive"));
    }
    let packet = GaussianPacket::new(sigma, 0.0, 0.0)?;
    let n_steps = (t_max / dt).ceil() as usize;
    params.validate(&[0.0, n_steps as f64 * dt])?;
    let outcomes: Vec<Result<Option<f64>>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|idx| {
            let noise = NoiseConfig { dt, n_steps, seed, trajectory_index: idx };
            Ok(integrate_trajectory(params, &packet, &noise)?.t_gamma)
        })
        .collect();
    let mut times = Vec::with_capacity(n_traj);
    let mut n_censored = 0;
    for o in outcomes {
        match o? {
            Some(t) => times.push(t),
            None => n_censored += 1,
        }
    }
    let mut acc = crate::stats::RunningStats::new();
    times.iter().for_each(|&t| acc.push(t));
    Ok(FirstPassageStats {
        mean: acc.mean(),
        std_dev: acc.std_dev(),
        times,
        n_censored,
    })
}

/// Closed-form ξ for λ ≡ 0 and constant ω:
/// `ξ⁺ = -imω tan ωt`, `ξ⁻ = -i tan(ωt)/(mω)`, `ξᶻ = -log cos² ωt`.
///
/// ξᶻ is returned as `-2 Log(cos ωt)`, so `e^{ξᶻ/2} = 1/cos ωt` keeps its
/// sign past each divergence time, as the integrated (α, β, γ) do.
pub fn harmonic_xi(params: &ModelParams, t: f64) -> Result<XiState> {
    if params.lambda.constant_value() != Some(0.0) {
        return Err(invalid("harmonic closed form requires lambda = 0"));
    }
    let omega = params.omega()?;
    let m = params.mass;
    let c = (omega * t).cos();
    if c.abs() < 1e-12 {
        return Err(Error::Singularity { t });
    }
    let tan = (omega * t).tan();
    Ok(XiState {
        xi_plus: Complex64::new(0.0, -m * omega * tan),
        xi_z: Complex64::new(c, 0.0).ln() * -2.0,
        xi_minus: if omega > 0.0 {
            Complex64::new(0.0, -tan / (m * omega))
        } else {
            Complex64::new(0.0, -t / m)
        },
        t,
    })
}

/// Commuting-limit solution (kinetic term dropped) for a sampled rotated
/// Gaussian variable `w_rot ~ N(0, λħt/2)`:
/// `ξ⁺ = -i m ω² t - 2i√i·w_rot`, `ξᶻ = ξ⁻ = 0`.
pub fn commuting_xi(w_rot: f64, params: &ModelParams, t: f64) -> Result<XiState> {
    let m_omega_sq = params.mass * params.omega_sq.constant_value().ok_or_else(|| {
        invalid("commuting limit requires a constant omega^2")
    })?;
    Ok(XiState {
        xi_plus: Complex64::new(0.0, -m_omega_sq * t) - I * SQRT_I * (2.0 * w_rot),
        xi_z: Complex64::new(0.0, 0.0),
        xi_minus: Complex64::new(0.0, 0.0),
        t,
    })
}

/// Auxiliary pair `X = -i ξ⁻ e^{-ξᶻ/2}`, `Y = e^{-ξᶻ/2}`; both obey
/// `ẍ + Ω²(t) x = 0` with `X(0) = 0, Ẋ(0) = -1/m, Y(0) = 1, Ẏ(0) = 0`.
pub fn xy_variables(xi: &XiState, _m: f64) -> (Complex64, Complex64) {
    let y = (-xi.xi_z * 0.5).exp();
    (-I * xi.xi_minus * y, y)
}
