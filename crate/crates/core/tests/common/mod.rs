//! Grid-level oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use stochastic_quartic::reference::{init_packet, interpolate, Grid, GridState};
use stochastic_quartic::wigner::{apply_minus, apply_plus, apply_z, grid_wigner, Cumulants, GaussianWigner};
use stochastic_quartic::GaussianPacket;

/// ψ(x) → e^{iwx²/2} ψ(x).
pub fn grid_plus(s: &GridState, grid: &Grid, w: f64) -> GridState {
    let psi = s
        .psi
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, w * grid.x(j).powi(2) / 2.0))
        .collect();
    GridState { psi, t: s.t }
}

/// ψ(x) → e^{w/4} ψ(x e^{w/2}), interpolated; zero outside the box.
pub fn grid_z(s: &GridState, grid: &Grid, w: f64) -> GridState {
    let (scale, amp) = ((w / 2.0).exp(), (w / 4.0).exp());
    let psi = (0..grid.n_points)
        .map(|j| {
            let y = grid.x(j) * scale;
            if y <= grid.x_min || y >= grid.x_max {
                Complex64::new(0.0, 0.0)
            } else {
                interpolate(s, grid, y) * amp
            }
        })
        .collect();
    GridState { psi, t: s.t }
}

/// ψ̃(p) → e^{iwp²/2} ψ̃(p) through the discrete Fourier transform.
pub fn grid_minus(s: &GridState, grid: &Grid, w: f64) -> GridState {
    let n = grid.n_points;
    let mut planner = FftPlanner::new();
    let mut buf = s.psi.clone();
    planner.plan_fft_forward(n).process(&mut buf);
    let dp = 2.0 * std::f64::consts::PI / (n as f64 * grid.dx());
    for (j, z) in buf.iter_mut().enumerate() {
        let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let p = k * dp;
        *z *= Complex64::from_polar(1.0 / n as f64, w * p * p / 2.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    GridState { psi: buf, t: s.t }
}

#[derive(Clone, Copy, Debug)]
pub struct WignerCase {
    pub packet: GaussianPacket,
    pub minus: f64,
    pub z: f64,
    pub plus: f64,
}

pub fn random_cases(n: usize, seed: u64) -> Vec<WignerCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| WignerCase {
            packet: GaussianPacket::new(rng.random_range(0.7..1.3), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
                .unwrap(),
            minus: rng.random_range(-0.4..0.4),
            z: rng.random_range(-0.4..0.4),
            plus: rng.random_range(-0.4..0.4),
        })
        .collect()
}

/// Largest cumulant mismatch between the closed-form maps and grid-Wigner
/// quadrature over the stages minus, z, plus.
pub fn wigner_case_error(case: &WignerCase) -> f64 {
    let grid = Grid::symmetric(9.0, 0.025, 1.0).unwrap();
    let mut state = init_packet(&case.packet, &grid).unwrap();
    let mut closed = GaussianWigner::from_packet(&case.packet);
    let mut worst = cumulant_gap(&state, &grid, &closed);
    for stage in 0..3 {
        match stage {
            0 => {
                state = grid_minus(&state, &grid, case.minus);
                closed = apply_minus(&closed, case.minus);
            }
            1 => {
                state = grid_z(&state, &grid, case.z);
                closed = apply_z(&closed, case.z);
            }
            _ => {
                state = grid_plus(&state, &grid, case.plus);
                closed = apply_plus(&closed, case.plus);
            }
        }
        worst = worst.max(cumulant_gap(&state, &grid, &closed));
    }
    worst
}

fn cumulant_gap(state: &GridState, grid: &Grid, closed: &GaussianWigner) -> f64 {
    let w = grid_wigner(state, grid, -9.0, 9.0, 181, 2).unwrap();
    let c: Cumulants = w.cumulants();
    c.max_abs_diff(&closed.cumulants())
}
