//! Invariants of the deterministic modules: operator algebra, the scalar
//! decoupling identity, the Dyson series at the observable level and
//! classical paths.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use stochastic_quartic::model::{build_operators, commutator, hst_scalar_identity, max_abs_block};
use stochastic_quartic::observables::{estimate_moments, harmonic_moment};
use stochastic_quartic::perturbation::{dyson_term, u_exact};
use stochastic_quartic::semiclassical::classical_trajectory;
use stochastic_quartic::{GaussianPacket, ModelParams, MonteCarlo, Which};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn su2_commutators_hold_in_the_bulk(
        dim in 4usize..40,
        m in 0.3f64..3.0,
        omega in 0.3f64..3.0,
        hbar in 0.3f64..2.0,
        basis in 0.3f64..3.0,
    ) {
        let params = ModelParams::new(m, omega, 0.2).with_hbar(hbar);
        let ops = build_operators(dim, &params, basis).unwrap();
        let bulk = dim - 2;
        let two = Complex64::new(2.0, 0.0);
        prop_assert!(max_abs_block(&(commutator(&ops.s_plus, &ops.s_minus) - &ops.s_z * two), bulk) < 1e-10);
        prop_assert!(max_abs_block(&(commutator(&ops.s_z, &ops.s_plus) - &ops.s_plus), bulk) < 1e-10);
        prop_assert!(max_abs_block(&(commutator(&ops.s_z, &ops.s_minus) + &ops.s_minus), bulk) < 1e-10);
    }

    #[test]
    fn classical_paths_conserve_energy(x_i in -1.0f64..1.0, x_f in -1.0f64..1.0, t in 0.2f64..2.0) {
        let params = ModelParams::new(10.0, 1.0, 0.2);
        let path = classical_trajectory(&params, x_i, x_f, t, 64, 0).unwrap();
        prop_assert!((path.positions[0] - x_i).abs() < 1e-12);
        prop_assert!((path.positions.last().unwrap() - x_f).abs() < 1e-9);
        prop_assert!(path.energy_drift(&params) < 1e-8, "drift {}", path.energy_drift(&params));
    }
}

#[test]
fn decoupling_residual_does_not_grow_under_refinement() {
    for (x, tau, lam) in [(1.0, 0.1, 0.2), (0.5, 0.05, 0.1), (1.3, 0.2, 0.3)] {
        let residuals: Vec<f64> = [100_000, 200_000, 400_000]
            .iter()
            .map(|&n| {
                let (lhs, rhs) = hst_scalar_identity(x, tau, lam, 1.0, 300.0, n).unwrap();
                (lhs - rhs).norm()
            })
            .collect();
        assert!(residuals[2] < 1e-4);
        for w in residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "({x}, {tau}, {lam}): {residuals:?}");
        }
    }
}

/// Coherent state with real amplitude `alpha` in the oscillator basis.
fn coherent(dim: usize, alpha: f64) -> DMatrix<Complex64> {
    let mut c = DMatrix::zeros(dim, 1);
    let mut amp = (-alpha * alpha / 2.0).exp();
    for n in 0..dim {
        c[(n, 0)] = Complex64::new(amp, 0.0);
        amp *= alpha / ((n + 1) as f64).sqrt();
    }
    c
}

fn expectation(op: &DMatrix<Complex64>, psi: &DMatrix<Complex64>) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re
}

#[test]
fn first_order_dyson_matches_the_stochastic_slope() {
    let (dim, t, lam0) = (48, 0.5, 0.1);
    // σ = 1 packet centred at a = 1 is the coherent state α = 1/√2
    let packet = GaussianPacket::new(1.0, 1.0, 0.0).unwrap();
    let harmonic = ModelParams::new(1.0, 1.0, 0.0);
    let params = ModelParams::new(1.0, 1.0, lam0);
    let ops = build_operators(dim, &harmonic, 1.0).unwrap();
    let c = coherent(dim, std::f64::consts::FRAC_1_SQRT_2);
    assert!((expectation(&ops.x, &c) - 1.0).abs() < 1e-12);
    assert!((expectation(&ops.x2, &c) - 1.5).abs() < 1e-12);

    let u0c = dyson_term(&params, dim, t, 0).unwrap() * &c;
    let u1c = dyson_term(&params, dim, t, 1).unwrap() * &c;
    let slope_dyson = 2.0 * (u0c.adjoint() * &ops.x2 * &u1c)[(0, 0)].re / lam0;
    let x2_free = harmonic_moment(2, Which::Position, t, &packet, &harmonic).unwrap();
    assert!((expectation(&ops.x2, &u0c) - x2_free).abs() < 1e-12);

    // curvature allowance from the exact truncated evolution
    let exact = u_exact(&params, dim, t).unwrap() * &c;
    let slope_exact = (expectation(&ops.x2, &exact) - x2_free) / lam0;
    let curvature = (slope_exact - slope_dyson).abs();

    let obs = [(2, Which::Position)];
    let mc = |p: &ModelParams, n_traj| {
        estimate_moments(p, &packet, &obs, &[t], &MonteCarlo { n_traj, seed: 13, dt: 1e-3 }).unwrap()[0][0]
    };
    let at_zero = mc(&harmonic, 2);
    let at_lam = mc(&params, 40_000);
    let slope_mc = (at_lam.value - at_zero.value) / lam0;
    let se = at_lam.std_error / lam0;
    assert!(
        (slope_mc - slope_dyson).abs() < 3.0 * se + curvature,
        "stochastic {slope_mc:.5} ± {se:.5}, Dyson {slope_dyson:.5}, exact {slope_exact:.5}"
    );
    assert!(slope_dyson.abs() > 3.0 * se, "slope {slope_dyson:.5} not resolved by ± {se:.5}");
}
