//! Invariants of the stochastic pipeline: stream independence, the discrete
//! X/Y equation, Monte Carlo normalisation and error scaling, and the order
//! of the Euler scheme.

use num_complex::Complex64;
use proptest::prelude::*;
use stochastic_quartic::disentangle::{
    first_passage_statistics, harmonic_xi, integrate_pair, integrate_trajectory, noise_rng, step_xi, xy_variables,
    AbgState, Direction, FrequencyDriver, NoiseConfig, XiState,
};
use stochastic_quartic::model::{eval_schedule, Schedule};
use stochastic_quartic::observables::{estimate_moments, harmonic_moment};
use stochastic_quartic::{GaussianPacket, ModelParams, MonteCarlo, Which};

fn benchmark() -> (ModelParams, GaussianPacket) {
    (ModelParams::new(10.0, 1.0, 0.2), GaussianPacket::new(0.5, 0.5, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_seed_never_touches_forward(seed in 0u64..1000, b1 in 0u64..1000, b2 in 1000u64..2000) {
        let (params, packet) = benchmark();
        let run = |bseed: u64| {
            let mut fwd_path = Vec::new();
            let out = integrate_pair(
                &params, &packet, 1e-3, 300,
                noise_rng(seed, 0, Direction::Forward),
                noise_rng(bseed, 0, Direction::Backward),
                |_, f, _| fwd_path.push(*f),
            ).unwrap();
            (fwd_path, out)
        };
        let (fa, a) = run(b1);
        let (fb, b) = run(b2);
        // a blow-up in either direction ends both paths, so compare the common prefix
        let n = fa.len().min(fb.len());
        prop_assert!(n > 1);
        prop_assert_eq!(&fa[..n], &fb[..n]);
        prop_assert_ne!(a.backward, b.backward);
    }

    #[test]
    fn zero_steps_is_the_initial_state(sigma in 0.1f64..3.0, seed in any::<u64>(), idx in any::<u64>()) {
        let (params, _) = benchmark();
        let packet = GaussianPacket::new(sigma, 0.3, -0.7).unwrap();
        let out = integrate_trajectory(&params, &packet, &NoiseConfig { dt: 1e-3, n_steps: 0, seed, trajectory_index: idx }).unwrap();
        prop_assert_eq!(out.forward, AbgState::initial(sigma));
        prop_assert_eq!(out.backward, AbgState::initial(sigma));
    }

    #[test]
    fn schedules_are_pure(c in 0.0f64..2.0, t in 0.0f64..5.0, v0 in 0.0f64..1.0, v1 in 0.0f64..1.0) {
        let table = Schedule::tabulated(vec![0.0, 2.0, 5.0], vec![v0, v1, c]).unwrap();
        for s in [Schedule::Constant(c), Schedule::SinSquared(c), table] {
            let a = eval_schedule(&s, t).unwrap();
            let b = eval_schedule(&s.clone(), t).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

/// Second differences of X and Y along one noisy Euler path, relative to
/// the Ω² term they should cancel; each variable is scaled by its sup norm
/// because X starts at zero.
fn xy_residual(dt: f64, t_end: f64, seed: u64) -> f64 {
    let (params, _) = benchmark();
    let m = params.mass;
    let mut drive = FrequencyDriver::new(&params, noise_rng(seed, 0, Direction::Forward), dt);
    let n = (t_end / dt).round() as usize;
    let mut xi = XiState::initial();
    let mut xs = vec![xy_variables(&xi, m)];
    let mut w2 = Vec::with_capacity(n);
    for k in 0..n {
        let w = drive.next(k as f64 * dt).unwrap();
        w2.push(w);
        xi = step_xi(&xi, w, m, dt).unwrap();
        xs.push(xy_variables(&xi, m));
    }
    let mut worst = 0.0f64;
    for pick in [|v: &(Complex64, Complex64)| v.0, |v: &(Complex64, Complex64)| v.1] {
        let path: Vec<Complex64> = xs.iter().map(pick).collect();
        let sup = path.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 1..n {
            let second = (path[k + 1] - path[k] * 2.0 + path[k - 1]) / (dt * dt);
            let r = (second + w2[k - 1] * path[k]).norm() / (w2[k - 1].norm() * sup);
            worst = worst.max(r);
        }
    }
    worst
}

#[test]
fn xy_satisfy_the_discrete_oscillator_equation() {
    let coarse = xy_residual(1e-3, 1.0, 3);
    let fine = xy_residual(2.5e-4, 1.0, 3);
    assert!(coarse < 1e-2, "relative residual {coarse:.3e} at dt = 1e-3");
    // local truncation error shrinks with the step
    assert!(fine < 0.6 * coarse, "{fine:.3e} vs {coarse:.3e}");
}

#[test]
fn euler_is_first_order_in_the_harmonic_limit() {
    let params = ModelParams::new(1.0, 1.0, 0.0);
    let t = 1.0;
    let exact = harmonic_xi(&params, t).unwrap();
    let err = |dt: f64| {
        let n = (t / dt).round() as usize;
        let mut xi = XiState::initial();
        for _ in 0..n {
            xi = step_xi(&xi, Complex64::new(1.0, 0.0), 1.0, dt).unwrap();
        }
        (xi.xi_plus - exact.xi_plus).norm() + (xi.xi_z - exact.xi_z).norm() + (xi.xi_minus - exact.xi_minus).norm()
    };
    for dt in [2e-3, 1e-3, 5e-4] {
        let ratio = err(dt) / err(dt / 2.0);
        assert!((ratio - 2.0).abs() < 0.2, "dt={dt}: ratio {ratio}");
    }

    // the same order survives the whole moment pipeline
    let packet = GaussianPacket::new(1.0, 1.0, 0.0).unwrap();
    let obs = [(2, Which::Position)];
    let moment_err = |dt: f64| {
        let est = estimate_moments(&params, &packet, &obs, &[t], &MonteCarlo { n_traj: 2, seed: 0, dt }).unwrap();
        (est[0][0].value - harmonic_moment(2, Which::Position, t, &packet, &params).unwrap()).abs()
    };
    let ratio = moment_err(1e-3) / moment_err(5e-4);
    assert!((ratio - 2.0).abs() < 0.2, "moment ratio {ratio}");
}

#[test]
fn zeroth_moment_and_imaginary_parts_vanish_on_average() {
    let (params, packet) = benchmark();
    let obs = [(0, Which::Position), (1, Which::Position), (2, Which::Position), (1, Which::Momentum), (2, Which::Momentum)];
    let times = [0.0, 0.5, 1.0, 1.5, 2.0];
    let est = estimate_moments(&params, &packet, &obs, &times, &MonteCarlo { n_traj: 4000, seed: 8, dt: 1e-4 }).unwrap();
    for e in &est[0] {
        assert!((e.value - 1.0).abs() <= 3.0 * e.std_error + 1e-12, "n=0 at t={}: {} ± {}", e.t, e.value, e.std_error);
    }
    for (o, row) in obs.iter().zip(&est) {
        for e in row {
            assert!(e.imag_consistent(3.0), "{o:?} t={}: Im {} ± {}", e.t, e.imag, e.imag_std_error);
        }
    }
}

#[test]
fn standard_error_scales_as_inverse_root_n() {
    let params = ModelParams::new(10.0, 1.0, 0.1);
    let packet = GaussianPacket::new(0.5, 0.5, 1.0).unwrap();
    let obs = [(1, Which::Position), (2, Which::Position)];
    let scaled = |n: usize| {
        let est = estimate_moments(&params, &packet, &obs, &[1.0], &MonteCarlo { n_traj: n, seed: 21, dt: 1e-3 }).unwrap();
        [est[0][0].std_error * (n as f64).sqrt(), est[1][0].std_error * (n as f64).sqrt()]
    };
    let reference = scaled(100_000);
    for n in [1_000, 10_000] {
        let s = scaled(n);
        for j in 0..2 {
            let r = s[j] / reference[j];
            assert!((r - 1.0).abs() < 0.2, "N={n}, observable {j}: SE·√N ratio {r}");
        }
    }
}

#[test]
fn stronger_coupling_blows_up_sooner() {
    let params = |lam| ModelParams::new(10.0, 1.0, lam);
    let weak = first_passage_statistics(&params(0.2), 1.0, 2e-3, 2000.0, 10_000, 77).unwrap();
    let strong = first_passage_statistics(&params(0.4), 1.0, 2e-3, 2000.0, 10_000, 77).unwrap();
    assert!(strong.mean < weak.mean, "{} vs {}", strong.mean, weak.mean);
}
