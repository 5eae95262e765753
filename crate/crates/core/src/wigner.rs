//! Gaussian Wigner functions and the phase-space action of the three
//! disentangled exponentials.
//!
//! `exp(ξ⁺Ŝ⁺)` with `ξ⁺ = i·w` shears momenta, `p → p + w x`;
//! `exp(ξᶻŜᶻ)` with real `w` rescales `(x, p) → (x e^{−w/2}, p e^{w/2})`;
//! `exp(ξ⁻Ŝ⁻)` with `ξ⁻ = i·w` shears positions, `x → x − w p`.
//! Units with ħ = 1.

use nalgebra::{Matrix2, Vector2};

use crate::error::{invalid, Error, Result};
use crate::observables::GaussianPacket;
use crate::reference::{Grid, GridState};

/// `W(z) = (√det P / π) exp[−(z − c)ᵀ P (z − c)]`, `z = (x, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianWigner {
    pub center: Vector2<f64>,
    pub precision: Matrix2<f64>,
}

/// Means and (co)variances of a Gaussian phase-space distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cumulants {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl Cumulants {
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p
    }

    pub fn max_abs_diff(&self, other: &Cumulants) -> f64 {
        [
            self.mean_x - other.mean_x,
            self.mean_p - other.mean_p,
            self.var_x - other.var_x,
            self.var_p - other.var_p,
            self.cov_xp - other.cov_xp,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

impl GaussianWigner {
    pub fn from_packet(packet: &GaussianPacket) -> Self {
        let s2 = packet.sigma * packet.sigma;
        Self {
            center: Vector2::new(packet.a, packet.k),
            precision: Matrix2::new(1.0 / s2, 0.0, 0.0, s2),
        }
    }

    pub fn new(center: Vector2<f64>, precision: Matrix2<f64>) -> Result<Self> {
        let sym = (precision[(0, 1)] - precision[(1, 0)]).abs() <= 1e-12 * precision.norm();
        if !sym || precision[(0, 0)] <= 0.0 || precision.determinant() <= 0.0 {
            return Err(invalid("Wigner precision must be symmetric positive definite"));
        }
        Ok(Self { center, precision })
    }

    pub fn value(&self, x: f64, p: f64) -> f64 {
        let d = Vector2::new(x, p) - self.center;
        let q = (d.transpose() * self.precision * d)[(0, 0)];
        self.precision.determinant().sqrt() / std::f64::consts::PI * (-q).exp()
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        self.precision.try_inverse().expect("positive definite") * 0.5
    }

    pub fn cumulants(&self) -> Cumulants {
        let c = self.covariance();
        Cumulants {
            mean_x: self.center[0],
            mean_p: self.center[1],
            var_x: c[(0, 0)],
            var_p: c[(1, 1)],
            cov_xp: c[(0, 1)],
        }
    }

    /// New distribution `W'(z) = W(S z)` for a unit-determinant map `S`.
    fn pull_back(&self, s: Matrix2<f64>) -> Self {
        let s_inv = s.try_inverse().expect("unit determinant");
        Self {
            center: s_inv * self.center,
            precision: s.transpose() * self.precision * s,
        }
    }
}

/// `W'(x, p) = W(x, p − w x)`.
pub fn apply_plus(w: &GaussianWigner, wp: f64) -> GaussianWigner {
    w.pull_back(Matrix2::new(1.0, 0.0, -wp, 1.0))
}

/// `W'(x, p) = W(x e^{w/2}, p e^{−w/2})`.
pub fn apply_z(w: &GaussianWigner, wz: f64) -> GaussianWigner {
    w.pull_back(Matrix2::new((wz / 2.0).exp(), 0.0, 0.0, (-wz / 2.0).exp()))
}

/// `W'(x, p) = W(x + w p, p)`.
pub fn apply_minus(w: &GaussianWigner, wm: f64) -> GaussianWigner {
    w.pull_back(Matrix2::new(1.0, wm, 0.0, 1.0))
}

/// Wigner function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major `values[ix * ps.len() + ip]`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.ps.len() + ip]
    }

    /// Cumulants from direct quadrature over the sampled region.
    pub fn cumulants(&self) -> Cumulants {
        let dx = if self.xs.len() > 1 { self.xs[1] - self.xs[0] } else { 1.0 };
        let dp = if self.ps.len() > 1 { self.ps[1] - self.ps[0] } else { 1.0 };
        let mut m = [0.0f64; 6];
        for (ix, &x) in self.xs.iter().enumerate() {
            for (ip, &p) in self.ps.iter().enumerate() {
                let w = self.at(ix, ip) * dx * dp;
                m[0] += w;
                m[1] += w * x;
                m[2] += w * p;
                m[3] += w * x * x;
                m[4] += w * p * p;
                m[5] += w * x * p;
            }
        }
        let (mx, mp) = (m[1] / m[0], m[2] / m[0]);
        Cumulants {
            mean_x: mx,
            mean_p: mp,
            var_x: m[3] / m[0] - mx * mx,
            var_p: m[4] / m[0] - mp * mp,
            cov_xp: m[5] / m[0] - mx * mp,
        }
    }

    /// `∫ W dp` at each sampled x.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = if self.ps.len() > 1 { self.ps[1] - self.ps[0] } else { 1.0 };
        (0..self.xs.len())
            .map(|ix| (0..self.ps.len()).map(|ip| self.at(ix, ip)).sum::<f64>() * dp)
            .collect()
    }
}

/// `W(x, p) = (1/π) ∫ dy e^{−2ipy} ψ(x+y) ψ*(x−y)` by direct summation on
/// every `x_stride`-th node, for `n_p` momenta in `[p_min, p_max]`.
pub fn grid_wigner(
    state: &GridState,
    grid: &Grid,
    p_min: f64,
    p_max: f64,
    n_p: usize,
    x_stride: usize,
) -> Result<WignerGrid> {
    let dx = grid.dx();
    let nyquist = std::f64::consts::PI / (2.0 * dx);
    if p_min.abs().max(p_max.abs()) >= nyquist {
        return Err(Error::Accuracy(format!(
            "momentum window exceeds the aliasing limit {nyquist:.3} of the grid"
        )));
    }
    if n_p < 2 || x_stride == 0 || !(p_max > p_min) {
        return Err(invalid("grid_wigner needs n_p >= 2, x_stride >= 1 and p_max > p_min"));
    }
    let n = grid.n_points;
    let ps: Vec<f64> = (0..n_p)
        .map(|k| p_min + (p_max - p_min) * k as f64 / (n_p - 1) as f64)
        .collect();
    let idx: Vec<usize> = (0..n).step_by(x_stride).collect();
    let mut values = Vec::with_capacity(idx.len() * n_p);
    for &i in &idx {
        let reach = i.min(n - 1 - i);
        // products ψ(x+y)ψ*(x−y) for y = jΔx
        let prods: Vec<_> = (0..=reach).map(|j| state.psi[i + j] * state.psi[i - j].conj()).collect();
        for &p in &ps {
            // y and −y terms pair up into 2 Re[e^{−2ipy} ψ(x+y)ψ*(x−y)]
            let mut acc = prods[0].re;
            for (j, z) in prods.iter().enumerate().skip(1) {
                let phase = -2.0 * p * j as f64 * dx;
                acc += 2.0 * (z.re * phase.cos() - z.im * phase.sin());
            }
            values.push(acc * dx / std::f64::consts::PI);
        }
    }
    Ok(WignerGrid {
        xs: idx.iter().map(|&i| grid.x(i)).collect(),
        ps,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::init_packet;

    fn packet() -> GaussianPacket {
        GaussianPacket::new(0.8, 0.3, -0.4).unwrap()
    }

    #[test]
    fn packet_cumulants() {
        let w = GaussianWigner::from_packet(&GaussianPacket::new(1.0, 0.0, 1.0).unwrap());
        assert_eq!(w.center, Vector2::new(0.0, 1.0));
        assert!((w.value(0.0, 1.0) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        let c = GaussianWigner::from_packet(&packet()).cumulants();
        assert!((c.var_x - 0.32).abs() < 1e-15);
        assert!((c.var_p - 1.0 / (2.0 * 0.64)).abs() < 1e-15);
        let sheared = apply_minus(&apply_plus(&w, 0.8), -0.5);
        let h = 0.02;
        let mass: f64 = (-400..400)
            .flat_map(|i| (-400..400).map(move |j| (i as f64 * h, 1.0 + j as f64 * h)))
            .map(|(x, q)| sheared.value(x, q))
            .sum::<f64>()
            * h
            * h;
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shear_plus() {
        let p = packet();
        let w0 = GaussianWigner::from_packet(&p);
        assert_eq!(apply_plus(&w0, 0.0), w0);
        let wp = 0.7;
        let c = apply_plus(&w0, wp).cumulants();
        let s2 = p.sigma * p.sigma;
        assert!((c.mean_p - (p.k + wp * p.a)).abs() < 1e-14);
        assert!((c.var_p - (1.0 + s2 * s2 * wp * wp) / (2.0 * s2)).abs() < 1e-14);
        assert!((c.mean_x - p.a).abs() < 1e-14 && (c.var_x - s2 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rescale_z() {
        let p = packet();
        let w0 = GaussianWigner::from_packet(&p);
        assert_eq!(apply_z(&w0, 0.0), w0);
        let wz = -0.6;
        let c = apply_z(&w0, wz).cumulants();
        let s2 = p.sigma * p.sigma;
        assert!((c.mean_x - p.a * (-wz / 2.0f64).exp()).abs() < 1e-14);
        assert!((c.mean_p - p.k * (wz / 2.0f64).exp()).abs() < 1e-14);
        assert!((c.var_x - s2 / 2.0 * (-wz as f64).exp()).abs() < 1e-14);
        assert!((c.var_p - wz.exp() / (2.0 * s2)).abs() < 1e-14);
        let c0 = w0.cumulants();
        assert!((c.uncertainty_product() - c0.uncertainty_product()).abs() < 1e-15);
        let back = apply_z(&apply_z(&w0, 1.3), -1.3);
        assert!((back.center - w0.center).norm() < 1e-15);
        assert!((back.precision - w0.precision).norm() < 1e-14);
    }

    #[test]
    fn shear_minus() {
        let p = packet();
        let w0 = GaussianWigner::from_packet(&p);
        assert_eq!(apply_minus(&w0, 0.0), w0);
        let wm = -0.9;
        let c = apply_minus(&w0, wm).cumulants();
        let s2 = p.sigma * p.sigma;
        assert!((c.mean_x - (p.a - wm * p.k)).abs() < 1e-14);
        assert!((c.var_x - (s2 * s2 + wm * wm) / (2.0 * s2)).abs() < 1e-14);
        assert!((c.mean_p - p.k).abs() < 1e-14 && (c.var_p - 1.0 / (2.0 * s2)).abs() < 1e-14);
    }

    #[test]
    fn shears_do_not_commute_and_raise_uncertainty() {
        let w0 = GaussianWigner::from_packet(&packet());
        let a = apply_plus(&apply_minus(&w0, 0.5), 0.4);
        let b = apply_minus(&apply_plus(&w0, 0.4), 0.5);
        assert!((a.precision - b.precision).norm() > 1e-3);
        for w in [apply_plus(&w0, 0.4), apply_minus(&w0, -0.5)] {
            assert!(w.cumulants().uncertainty_product() > 0.25);
            assert!((w.precision.determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_precision() {
        assert!(GaussianWigner::new(Vector2::zeros(), Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn grid_matches_closed_form() {
        let p = packet();
        let grid = Grid::symmetric(8.0, 0.02, 1.0).unwrap();
        let s = init_packet(&p, &grid).unwrap();
        let wg = grid_wigner(&s, &grid, -5.0, 5.0, 101, 5).unwrap();
        let exact = GaussianWigner::from_packet(&p);
        let mut worst = 0.0f64;
        for (ix, &x) in wg.xs.iter().enumerate() {
            for (ip, &q) in wg.ps.iter().enumerate() {
                worst = worst.max((wg.at(ix, ip) - exact.value(x, q)).abs());
            }
        }
        assert!(worst < 1e-4, "worst {worst}");
        let marg = wg.x_marginal();
        for (ix, &x) in wg.xs.iter().enumerate() {
            let rho = p.wavefunction(x).norm_sqr();
            assert!((marg[ix] - rho).abs() < 1e-4);
        }
        assert!(grid_wigner(&s, &grid, -100.0, 100.0, 11, 5).is_err());
    }
}
