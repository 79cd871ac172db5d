//! Model definitions: nonlinearities, transformed variables, energies.
//!
//! Cahn-Hilliard works in the shifted variable `v = u + 1` so the pure
//! phases sit at `v = 0, 2`. In that variable the reaction terms are
//! `f(v) = v³ - 3v² + 2v` and the stabilized `f̃(v) = f(v) - 2v = v³ - 3v²`
//! (the `2v` is kept implicit inside the factored operator), with potential
//! `F(v-1) = ¼v⁴ - v³ + v²`.
//!
//! The vector model uses the triple-well `W(u) = Π_i |u - z_i|²` over the
//! cube roots of unity `z_i`; since `Π_i (w - z_i) = w³ - 1` for complex
//! `w = u₁ + i u₂`, the potential evaluates as `W = |w³ - 1|²`, an exact
//! degree-6 polynomial with exact degree-5 gradient. The working variable
//! is `v = u - z₃` and `∇W̃(v) = ∇W(v + z₃) - 18 v` (the Jacobian of ∇W at
//! each well is 18·I, so `18 v` is the stabilized implicit part).

use crate::grid::{centered_gradient_sq_1d, centered_gradient_sq_2d, Field1D, Field2D, SolverField};

/// Scalar Cahn-Hilliard in the shifted variable.
#[derive(Debug, Clone, Copy)]
pub struct ChModel {
    pub eps: f64,
}

impl ChModel {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0, "interface width must be positive");
        Self { eps }
    }

    /// `f(v) = f(u = v-1) = v³ - 3v² + 2v`
    #[inline]
    pub fn f(v: f64) -> f64 {
        v * (v * (v - 3.0) + 2.0)
    }

    /// Stabilized reaction `f̃(v) = v³ - 3v²`.
    #[inline]
    pub fn f_tilde(v: f64) -> f64 {
        v * v * (v - 3.0)
    }

    /// `f'(v) = 3v² - 6v + 2`
    #[inline]
    pub fn f_prime(v: f64) -> f64 {
        v * (3.0 * v - 6.0) + 2.0
    }

    /// Double-well potential `F(v-1) = ¼v⁴ - v³ + v²`.
    #[inline]
    pub fn big_f(v: f64) -> f64 {
        v * v * (0.25 * v * v - v + 1.0)
    }

    /// Discrete free energy `Σ_j h (ε²/2 |∇v|² + F(v_j - 1))`.
    pub fn energy_1d(&self, v: &Field1D) -> f64 {
        let gsq = centered_gradient_sq_1d(v);
        let h = v.grid().h();
        let e2h = 0.5 * self.eps * self.eps;
        v.values()
            .iter()
            .zip(gsq.values())
            .map(|(&vj, &g)| e2h * g + Self::big_f(vj))
            .sum::<f64>()
            * h
    }

    pub fn energy_2d(&self, v: &Field2D) -> f64 {
        let gsq = centered_gradient_sq_2d(v);
        let cell = v.grid().gx().h() * v.grid().gy().h();
        let e2h = 0.5 * self.eps * self.eps;
        v.values()
            .iter()
            .zip(gsq.values())
            .map(|(&vj, &g)| e2h * g + Self::big_f(vj))
            .sum::<f64>()
            * cell
    }
}

/// The three wells of the vector model: cube roots of unity in the
/// `(u₁, u₂)` plane.
pub const VCH_WELLS: [(f64, f64); 3] = [
    (1.0, 0.0),
    (-0.5, 0.866_025_403_784_438_6),
    (-0.5, -0.866_025_403_784_438_6),
];

/// Background state subtracted from `u`: `z₃ = (-1/2, -√3/2)`.
pub const VCH_BACKGROUND: (f64, f64) = VCH_WELLS[2];

/// Vector Cahn-Hilliard with triple-well potential.
#[derive(Debug, Clone, Copy)]
pub struct VchModel {
    pub eps: f64,
}

impl VchModel {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0, "interface width must be positive");
        Self { eps }
    }

    /// `W(u) = |(u₁ + iu₂)³ - 1|²`
    #[inline]
    pub fn w(u1: f64, u2: f64) -> f64 {
        let re = u1 * (u1 * u1 - 3.0 * u2 * u2) - 1.0;
        let im = u2 * (3.0 * u1 * u1 - u2 * u2);
        re * re + im * im
    }

    /// Exact gradient of `W` at a point `u`.
    #[inline]
    pub fn grad_w(u1: f64, u2: f64) -> (f64, f64) {
        // W = A² + B², A = u₁³-3u₁u₂²-1, B = 3u₁²u₂-u₂³
        let a = u1 * (u1 * u1 - 3.0 * u2 * u2) - 1.0;
        let b = u2 * (3.0 * u1 * u1 - u2 * u2);
        let sq = u1 * u1 - u2 * u2;
        let wx = 6.0 * a * sq + 12.0 * b * u1 * u2;
        let wy = -12.0 * a * u1 * u2 + 6.0 * b * sq;
        (wx, wy)
    }

    /// Gradient of `W` at `v + z₃` (the working variable).
    #[inline]
    pub fn grad_w_at_shifted(v1: f64, v2: f64) -> (f64, f64) {
        Self::grad_w(v1 + VCH_BACKGROUND.0, v2 + VCH_BACKGROUND.1)
    }

    /// Stabilized gradient `∇W̃(v) = ∇W(v + z₃) - 18 v`.
    #[inline]
    pub fn grad_w_tilde(v1: f64, v2: f64) -> (f64, f64) {
        let (wx, wy) = Self::grad_w_at_shifted(v1, v2);
        (wx - 18.0 * v1, wy - 18.0 * v2)
    }

    /// Discrete `E = Σ cell (ε²/2 (|∇u₁|² + |∇u₂|²) + W(u))` with `u = v + z₃`.
    pub fn energy(&self, v1: &Field2D, v2: &Field2D) -> f64 {
        let g1 = centered_gradient_sq_2d(v1);
        let g2 = centered_gradient_sq_2d(v2);
        let cell = v1.grid().gx().h() * v1.grid().gy().h();
        let e2h = 0.5 * self.eps * self.eps;
        let mut total = 0.0;
        for i in 0..v1.values().len() {
            let u1 = v1.values()[i] + VCH_BACKGROUND.0;
            let u2 = v2.values()[i] + VCH_BACKGROUND.1;
            total += e2h * (g1.values()[i] + g2.values()[i]) + Self::w(u1, u2);
        }
        total * cell
    }
}

/// Sixth-order model constants: `u_t = Δ[(ε²Δ - f'(v) + ε²η)(ε²Δv - f(v))]`
/// in the shifted variable, sharing `f` with [`ChModel`].
#[derive(Debug, Clone, Copy)]
pub struct SixthOrderModel {
    pub eps: f64,
    pub eta: f64,
}

impl SixthOrderModel {
    pub fn new(eps: f64, eta: f64) -> Self {
        assert!(eps > 0.0 && eta > 0.0, "model constants must be positive");
        Self { eps, eta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, Grid2D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn ch_reaction_equilibria() {
        assert_eq!(ChModel::f(0.0), 0.0);
        assert_eq!(ChModel::f(2.0), 0.0);
        assert_eq!(ChModel::f(1.0), 0.0);
        assert_eq!(ChModel::f_tilde(1.0), -2.0);
        assert_eq!(ChModel::f_tilde(0.0), 0.0);
    }

    #[test]
    fn ch_f_tilde_is_f_minus_2v() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v: f64 = rng.gen_range(-3.0..3.0);
            assert!((ChModel::f(v) - (ChModel::f_tilde(v) + 2.0 * v)).abs() < 1e-13);
            // derivative consistency by central differences
            let h = 1e-6;
            let fd = (ChModel::f(v + h) - ChModel::f(v - h)) / (2.0 * h);
            assert!((fd - ChModel::f_prime(v)).abs() < 1e-6);
        }
    }

    #[test]
    fn ch_energy_constants() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 128).unwrap();
        let model = ChModel::new(0.18);
        assert_eq!(model.energy_1d(&Field1D::zeros(grid)), 0.0);
        // F(0) = 1/4 on v ≡ 1 integrates to π/2 over [0, 2π]
        let e = model.energy_1d(&Field1D::constant(grid, 1.0));
        assert!((e - PI / 2.0).abs() < 1e-12, "{e}");
        assert!(model.energy_1d(&Field1D::constant(grid, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn ch_energy_nonnegative_on_random_fields() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 64).unwrap();
        let model = ChModel::new(0.18);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = Field1D::from_fn(grid, |_| rng.gen_range(-2.0..4.0));
            assert!(model.energy_1d(&f) >= 0.0);
        }
    }

    #[test]
    fn vch_wells_are_critical_points_with_zero_potential() {
        for &(z1, z2) in &VCH_WELLS {
            assert!(VchModel::w(z1, z2).abs() < 1e-14);
            let (gx, gy) = VchModel::grad_w(z1, z2);
            assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
        }
        // v = (0,0) is the background well z₃
        let (gx, gy) = VchModel::grad_w_at_shifted(0.0, 0.0);
        assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
    }

    #[test]
    fn vch_w_matches_distance_product() {
        // independent route: W = Π |u - z_i|²
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u1: f64 = rng.gen_range(-2.0..2.0);
            let u2: f64 = rng.gen_range(-2.0..2.0);
            let prod: f64 = VCH_WELLS
                .iter()
                .map(|&(z1, z2)| (u1 - z1).powi(2) + (u2 - z2).powi(2))
                .product();
            let w = VchModel::w(u1, u2);
            assert!((w - prod).abs() <= 1e-12 * prod.max(1.0), "{w} vs {prod}");
        }
    }

    #[test]
    fn vch_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..100 {
            let u1: f64 = rng.gen_range(-1.5..1.5);
            let u2: f64 = rng.gen_range(-1.5..1.5);
            let (gx, gy) = VchModel::grad_w(u1, u2);
            let fdx = (VchModel::w(u1 + h, u2) - VchModel::w(u1 - h, u2)) / (2.0 * h);
            let fdy = (VchModel::w(u1, u2 + h) - VchModel::w(u1, u2 - h)) / (2.0 * h);
            assert!((gx - fdx).abs() < 1e-5, "{gx} vs {fdx}");
            assert!((gy - fdy).abs() < 1e-5, "{gy} vs {fdy}");
        }
    }

    #[test]
    fn vch_jacobian_at_wells_is_18_identity() {
        let h = 1e-6;
        for &(z1, z2) in &VCH_WELLS {
            let (gxp, gyp) = VchModel::grad_w(z1 + h, z2);
            let (gxm, gym) = VchModel::grad_w(z1 - h, z2);
            let j11 = (gxp - gxm) / (2.0 * h);
            let j21 = (gyp - gym) / (2.0 * h);
            let (gxp, gyp) = VchModel::grad_w(z1, z2 + h);
            let (gxm, gym) = VchModel::grad_w(z1, z2 - h);
            let j12 = (gxp - gxm) / (2.0 * h);
            let j22 = (gyp - gym) / (2.0 * h);
            assert!((j11 - 18.0).abs() < 1e-5, "{j11}");
            assert!((j22 - 18.0).abs() < 1e-5, "{j22}");
            assert!(j12.abs() < 1e-5 && j21.abs() < 1e-5);
        }
    }

    #[test]
    fn vch_gradient_cross_partials_are_symmetric() {
        // ∂(W_x)/∂u₂ = ∂(W_y)/∂u₁ since ∇W is a gradient field
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..50 {
            let u1: f64 = rng.gen_range(-1.5..1.5);
            let u2: f64 = rng.gen_range(-1.5..1.5);
            let dxy = (VchModel::grad_w(u1, u2 + h).0 - VchModel::grad_w(u1, u2 - h).0) / (2.0 * h);
            let dyx = (VchModel::grad_w(u1 + h, u2).1 - VchModel::grad_w(u1 - h, u2).1) / (2.0 * h);
            assert!((dxy - dyx).abs() < 1e-5);
        }
    }

    #[test]
    fn vch_energy_values() {
        let grid = Grid2D::square(0.0, 2.0 * PI, 32).unwrap();
        let model = VchModel::new(0.32);
        // u ≡ z_i gives zero energy; in working variables v = z_i - z₃
        for &(z1, z2) in &VCH_WELLS {
            let v1 = Field2D::constant(grid, z1 - VCH_BACKGROUND.0);
            let v2 = Field2D::constant(grid, z2 - VCH_BACKGROUND.1);
            assert!(model.energy(&v1, &v2).abs() < 1e-10);
        }
        // u ≡ (0,0): W(0,0) = Π|z_i|² = 1, so E = |Ω| = (2π)²
        let v1 = Field2D::constant(grid, -VCH_BACKGROUND.0);
        let v2 = Field2D::constant(grid, -VCH_BACKGROUND.1);
        let area = (2.0 * PI) * (2.0 * PI);
        assert!((model.energy(&v1, &v2) - area).abs() < 1e-9);

        // random fields have nonnegative energy (W ≥ 0, gradients ≥ 0)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v1 = Field2D::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
        let v2 = Field2D::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
        assert!(model.energy(&v1, &v2) >= 0.0);
    }

    #[test]
    fn sixth_order_shares_ch_reaction() {
        let m = SixthOrderModel::new(0.18, 1.0);
        assert_eq!(m.eps, 0.18);
        // f'(v) = 3v² - 6v + 2 at the equilibria
        assert_eq!(ChModel::f_prime(0.0), 2.0);
        assert_eq!(ChModel::f_prime(2.0), 2.0);
    }
}
