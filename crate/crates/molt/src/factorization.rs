//! Factored inverses of the implicit operators.
//!
//! A backward-in-time discretization of a fourth-order gradient flow leaves
//! an operator of the form `A = I - cΔt·Δ + dΔt·Δ²` to invert each step.
//! `A` factors into two modified Helmholtz operators
//! `(I - Δ/α₁²)(I - Δ/α₂²)` with `1/α²_{1,2} = cΔt/2 ± √((cΔt/2)² - dΔt)`,
//! real whenever `(cΔt/2)² ≥ dΔt`. Below that threshold the α become
//! complex (oscillatory Green's functions), so the operator is instead
//! completed to the square `(I - √(dΔt)Δ)²` and the linear mismatch
//! `S·Δ = (cΔt - 2√(dΔt))·Δ` is lagged onto the right-hand side of the
//! fixed-point iteration.
//!
//! The sixth-order operator `I - Δt ε⁴ Δ³` is completed to the cube
//! `(I - ∛(Δtε⁴)Δ)³` with two lagged Laplacian corrections.
//!
//! Every scheme in this crate funnels through the one (c, d)
//! parameterization; each stepper supplies its own constants.

use crate::grid::Grid1D;
use crate::grid::{Field1D, SolverField};
use crate::helmholtz::{apply_linv_periodic, HelmholtzPlan, PlanError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FactorizationError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("scheme constant must be positive, got c = {0}")]
    NonPositiveC(f64),
    #[error("scheme constant must be positive, got d = {0}")]
    NonPositiveD(f64),
    #[error("interface width must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Which of the two factorizations applies at this (c, d, Δt).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarticMode {
    /// `(cΔt/2)² ≥ dΔt`: two distinct real Helmholtz parameters, no lag.
    Factored,
    /// `(cΔt/2)² < dΔt`: perfect square with lagged stabilization.
    CompletedSquare,
}

/// Factorization of `I - cΔt·Δ + dΔt·Δ²`.
#[derive(Debug, Clone, Copy)]
pub struct QuarticPlan {
    pub mode: QuarticMode,
    pub dt: f64,
    pub c: f64,
    pub d: f64,
    /// `1/α₁²` (the larger root; in completed-square mode both equal `√(dΔt)`).
    pub inv_alpha1_sq: f64,
    /// `1/α₂²`.
    pub inv_alpha2_sq: f64,
    /// Lagged stabilization coefficient `S = cΔt - 2√(dΔt)`; zero in
    /// factored mode, strictly negative in completed-square mode. The
    /// sweep adds `S·Δ x^k` to the right-hand side.
    pub lag_coefficient: f64,
}

impl QuarticPlan {
    pub fn new(dt: f64, c: f64, d: f64) -> Result<Self, FactorizationError> {
        if !(dt > 0.0) {
            return Err(FactorizationError::NonPositiveDt(dt));
        }
        if !(c > 0.0) {
            return Err(FactorizationError::NonPositiveC(c));
        }
        if !(d > 0.0) {
            return Err(FactorizationError::NonPositiveD(d));
        }
        let half = 0.5 * c * dt;
        let disc = half * half - d * dt;
        if disc >= 0.0 {
            let root = disc.sqrt();
            Ok(Self {
                mode: QuarticMode::Factored,
                dt,
                c,
                d,
                inv_alpha1_sq: half + root,
                inv_alpha2_sq: half - root,
                lag_coefficient: 0.0,
            })
        } else {
            let sq = (d * dt).sqrt();
            Ok(Self {
                mode: QuarticMode::CompletedSquare,
                dt,
                c,
                d,
                inv_alpha1_sq: sq,
                inv_alpha2_sq: sq,
                lag_coefficient: c * dt - 2.0 * sq,
            })
        }
    }

    /// Backward Euler for CH: operator `I - 2Δt·Δ + ε²Δt·Δ²`.
    pub fn backward_euler(dt: f64, eps: f64) -> Result<Self, FactorizationError> {
        check_eps(eps)?;
        Self::new(dt, 2.0, eps * eps)
    }

    /// BDF2 for CH: stabilized operator `I - (4/3)Δt·Δ + (2/3)ε²Δt·Δ²`.
    pub fn bdf2(dt: f64, eps: f64) -> Result<Self, FactorizationError> {
        check_eps(eps)?;
        Self::new(dt, 4.0 / 3.0, 2.0 / 3.0 * eps * eps)
    }

    /// BDF3 for CH: stabilized operator `I - (12/11)Δt·Δ + (6/11)ε²Δt·Δ²`.
    pub fn bdf3(dt: f64, eps: f64) -> Result<Self, FactorizationError> {
        check_eps(eps)?;
        Self::new(dt, 12.0 / 11.0, 6.0 / 11.0 * eps * eps)
    }

    /// One SDIRK stage with diagonal η: `I - 2ηΔt·Δ + ηε²Δt·Δ²` acting on K.
    pub fn sdirk_stage(dt: f64, eps: f64, eta: f64) -> Result<Self, FactorizationError> {
        check_eps(eps)?;
        Self::new(dt, 2.0 * eta, eta * eps * eps)
    }

    /// Vector CH backward Euler: `I - 18Δt·Δ + ε²Δt·Δ²`, switching at Δt = ε²/81.
    pub fn vch_backward_euler(dt: f64, eps: f64) -> Result<Self, FactorizationError> {
        check_eps(eps)?;
        Self::new(dt, 18.0, eps * eps)
    }

    pub fn alpha1(&self) -> f64 {
        (1.0 / self.inv_alpha1_sq).sqrt()
    }

    pub fn alpha2(&self) -> f64 {
        (1.0 / self.inv_alpha2_sq).sqrt()
    }
}

fn check_eps(eps: f64) -> Result<(), FactorizationError> {
    if !(eps > 0.0) {
        Err(FactorizationError::NonPositiveEps(eps))
    } else {
        Ok(())
    }
}

/// Cube completion of `I - Δt ε⁴ Δ³`.
#[derive(Debug, Clone, Copy)]
pub struct SexticPlan {
    pub dt: f64,
    pub eps: f64,
    /// `1/α² = ∛(Δt ε⁴)`.
    pub inv_alpha_sq: f64,
    /// Coefficient of the lagged `Δ v` correction: `3∛(Δtε⁴)`.
    pub lag_lap: f64,
    /// Coefficient of the lagged `Δ² v` correction: `3(∛(Δtε⁴))²`.
    pub lag_bilap: f64,
}

impl SexticPlan {
    pub fn new(dt: f64, eps: f64) -> Result<Self, FactorizationError> {
        if !(dt > 0.0) {
            return Err(FactorizationError::NonPositiveDt(dt));
        }
        check_eps(eps)?;
        let s = (dt * eps.powi(4)).cbrt();
        Ok(Self { dt, eps, inv_alpha_sq: s, lag_lap: 3.0 * s, lag_bilap: 3.0 * s * s })
    }

    pub fn alpha(&self) -> f64 {
        (1.0 / self.inv_alpha_sq).sqrt()
    }
}

/// The operations steppers need from a factored implicit operator. Implemented
/// for both the 1D operator and the dimensionally split 2D operator, so all
/// time integrators are dimension-agnostic.
///
/// Writing `P` for the product of all line-computable Helmholtz inverses,
/// the fixed-point sweep for `A X = R + κ·Δ G(X) + ρ·Δ² W` is
///
/// `X^{k+1} = P⁻¹[R] + κ·lap_channel(G + (S/κ)X^k) + ρ·bilap_channel(W) + C[X^k]`
///
/// where `C` is the lagged splitting correction (zero in 1D) and `S` the
/// lagged completed-square stabilization (zero in factored mode). Both
/// channels apply `Δ` and `Δ²` through Green's-function identities only:
/// `P⁻¹Δ = α₁²·L₂⁻¹(L₁⁻¹ - I)` and `P⁻¹Δ² = α₁²α₂²(L₁⁻¹ - I)(L₂⁻¹ - I)`
/// in 1D, with the `L⁻¹ - I` factors replaced by `(LxLy)⁻¹ - I + DxDy`
/// in 2D.
pub trait ImplicitOperator: Sync {
    type Field: SolverField;

    /// `P⁻¹ f`: all Helmholtz factors inverted line by line.
    fn inv_all(&self, f: &Self::Field) -> Self::Field;

    /// `P⁻¹[Δ g]` without forming `Δ g`.
    fn lap_channel(&self, g: &Self::Field) -> Self::Field;

    /// `P⁻¹[Δ² w]` without forming `Δ² w`.
    fn bilap_channel(&self, w: &Self::Field) -> Self::Field;

    /// `acc += C[xk]` where `C` is the lagged splitting correction making
    /// the converged fixed point solve the unsplit operator (2D only).
    fn add_splitting_correction(&self, acc: &mut Self::Field, xk: &Self::Field);

    /// Completed-square stabilization coefficient `S` (≤ 0).
    fn lag_coefficient(&self) -> f64;
}

/// 1D quartic operator: product of two Helmholtz line inverses.
#[derive(Debug, Clone)]
pub struct Quartic1D {
    pub plan: QuarticPlan,
    h1: HelmholtzPlan,
    h2: HelmholtzPlan,
}

impl Quartic1D {
    pub fn new(plan: QuarticPlan, grid: Grid1D, m: usize) -> Result<Self, FactorizationError> {
        let h1 = HelmholtzPlan::new((1.0 / plan.inv_alpha1_sq).sqrt(), grid, m)?;
        let h2 = HelmholtzPlan::new((1.0 / plan.inv_alpha2_sq).sqrt(), grid, m)?;
        Ok(Self { plan, h1, h2 })
    }

    pub fn helmholtz_plans(&self) -> (&HelmholtzPlan, &HelmholtzPlan) {
        (&self.h1, &self.h2)
    }
}

impl ImplicitOperator for Quartic1D {
    type Field = Field1D;

    fn inv_all(&self, f: &Field1D) -> Field1D {
        apply_linv_periodic(&apply_linv_periodic(f, &self.h1), &self.h2)
    }

    fn lap_channel(&self, g: &Field1D) -> Field1D {
        let a1sq = 1.0 / self.plan.inv_alpha1_sq;
        let mut m1 = apply_linv_periodic(g, &self.h1);
        m1.sub(g);
        let mut out = apply_linv_periodic(&m1, &self.h2);
        out.scale(a1sq);
        out
    }

    fn bilap_channel(&self, w: &Field1D) -> Field1D {
        let a1sq = 1.0 / self.plan.inv_alpha1_sq;
        let a2sq = 1.0 / self.plan.inv_alpha2_sq;
        let mut t = apply_linv_periodic(w, &self.h2);
        t.sub(w);
        let mut out = apply_linv_periodic(&t, &self.h1);
        out.sub(&t);
        out.scale(a1sq * a2sq);
        out
    }

    fn add_splitting_correction(&self, _acc: &mut Field1D, _xk: &Field1D) {}

    fn lag_coefficient(&self) -> f64 {
        self.plan.lag_coefficient
    }
}

/// Apply the factored quartic inverse `L₁⁻¹L₂⁻¹` to a 1D right-hand side.
pub fn apply_quartic_inverse(rhs: &Field1D, op: &Quartic1D) -> Field1D {
    op.inv_all(rhs)
}

/// 1D sextic operator: triple Helmholtz inverse.
#[derive(Debug, Clone)]
pub struct Sextic1D {
    pub plan: SexticPlan,
    h: HelmholtzPlan,
}

impl Sextic1D {
    pub fn new(plan: SexticPlan, grid: Grid1D, m: usize) -> Result<Self, FactorizationError> {
        let h = HelmholtzPlan::new((1.0 / plan.inv_alpha_sq).sqrt(), grid, m)?;
        Ok(Self { plan, h })
    }
}

/// Apply `(I - ∛(Δtε⁴)Δ)⁻³` to a 1D right-hand side.
pub fn apply_sextic_inverse(rhs: &Field1D, op: &Sextic1D) -> Field1D {
    let w = apply_linv_periodic(rhs, &op.h);
    let w = apply_linv_periodic(&w, &op.h);
    apply_linv_periodic(&w, &op.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::max_norm;
    use std::f64::consts::PI;

    #[test]
    fn be_bifurcation_boundary_is_factored_with_equal_roots() {
        let eps = 0.18;
        let dt = eps * eps;
        let plan = QuarticPlan::backward_euler(dt, eps).unwrap();
        assert_eq!(plan.mode, QuarticMode::Factored);
        assert!((plan.inv_alpha1_sq - plan.inv_alpha2_sq).abs() < 1e-15);
        assert!((plan.inv_alpha1_sq - eps * eps * eps * eps).abs() < 1e-15);
        assert_eq!(plan.lag_coefficient, 0.0);
    }

    #[test]
    fn be_factored_values() {
        // direct evaluation of 1/α² = Δt ± √(Δt² - ε²Δt) at ε = 0.18, Δt = 0.05
        let plan = QuarticPlan::backward_euler(0.05, 0.18).unwrap();
        assert_eq!(plan.mode, QuarticMode::Factored);
        let disc: f64 = 0.05 * 0.05 - 0.18 * 0.18 * 0.05;
        let expect1 = 0.05 + disc.sqrt();
        let expect2 = 0.05 - disc.sqrt();
        assert!((plan.inv_alpha1_sq - expect1).abs() < 1e-16);
        assert!((plan.inv_alpha2_sq - expect2).abs() < 1e-16);
        assert!((plan.inv_alpha1_sq - 0.07966479394838266).abs() < 1e-15);
        assert!((plan.inv_alpha2_sq - 0.02033520605161734).abs() < 1e-15);
    }

    #[test]
    fn completed_square_lag_is_negative() {
        let eps = 0.18;
        let dt = 0.01; // < ε² = 0.0324
        let plan = QuarticPlan::backward_euler(dt, eps).unwrap();
        assert_eq!(plan.mode, QuarticMode::CompletedSquare);
        let sq = (eps * eps * dt).sqrt();
        assert!((plan.inv_alpha1_sq - sq).abs() < 1e-16);
        assert!(plan.lag_coefficient < 0.0);
        assert!((plan.lag_coefficient.abs() - (2.0 * sq - 2.0 * dt)).abs() < 1e-16);
    }

    #[test]
    fn method_switch_points() {
        let eps = 0.18;
        let e2 = eps * eps;
        // BE switches at Δt = ε²
        assert_eq!(
            QuarticPlan::backward_euler(e2 * 1.001, eps).unwrap().mode,
            QuarticMode::Factored
        );
        assert_eq!(
            QuarticPlan::backward_euler(e2 * 0.999, eps).unwrap().mode,
            QuarticMode::CompletedSquare
        );
        // BDF2 at (3/2)ε², BDF3 at (11/6)ε², SDIRK at ε²/η, VCH at ε²/81
        assert_eq!(QuarticPlan::bdf2(1.5 * e2 * 1.001, eps).unwrap().mode, QuarticMode::Factored);
        assert_eq!(
            QuarticPlan::bdf2(1.5 * e2 * 0.999, eps).unwrap().mode,
            QuarticMode::CompletedSquare
        );
        assert_eq!(
            QuarticPlan::bdf3(11.0 / 6.0 * e2 * 1.001, eps).unwrap().mode,
            QuarticMode::Factored
        );
        assert_eq!(
            QuarticPlan::bdf3(11.0 / 6.0 * e2 * 0.999, eps).unwrap().mode,
            QuarticMode::CompletedSquare
        );
        let eta = 1.0 - 2.0_f64.sqrt() / 2.0;
        assert_eq!(
            QuarticPlan::sdirk_stage(e2 / eta * 1.001, eps, eta).unwrap().mode,
            QuarticMode::Factored
        );
        assert_eq!(
            QuarticPlan::sdirk_stage(e2 / eta * 0.999, eps, eta).unwrap().mode,
            QuarticMode::CompletedSquare
        );
        assert_eq!(
            QuarticPlan::vch_backward_euler(e2 / 81.0 * 1.001, eps).unwrap().mode,
            QuarticMode::Factored
        );
        assert_eq!(
            QuarticPlan::vch_backward_euler(e2 / 81.0 * 0.999, eps).unwrap().mode,
            QuarticMode::CompletedSquare
        );
    }

    #[test]
    fn vch_roots_match_printed_form() {
        // 1/αᵢ² = 9Δt ± √(81Δt² - ε²Δt)
        let (dt, eps) = (0.01, 0.18);
        let plan = QuarticPlan::vch_backward_euler(dt, eps).unwrap();
        let disc: f64 = 81.0 * dt * dt - eps * eps * dt;
        assert!((plan.inv_alpha1_sq - (9.0 * dt + disc.sqrt())).abs() < 1e-16);
        assert!((plan.inv_alpha2_sq - (9.0 * dt - disc.sqrt())).abs() < 1e-16);
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(matches!(
            QuarticPlan::new(0.0, 2.0, 1.0),
            Err(FactorizationError::NonPositiveDt(_))
        ));
        assert!(matches!(
            QuarticPlan::new(0.1, -2.0, 1.0),
            Err(FactorizationError::NonPositiveC(_))
        ));
        assert!(matches!(
            QuarticPlan::new(0.1, 2.0, 0.0),
            Err(FactorizationError::NonPositiveD(_))
        ));
        assert!(matches!(SexticPlan::new(-0.1, 0.2), Err(FactorizationError::NonPositiveDt(_))));
        assert!(matches!(SexticPlan::new(0.1, 0.0), Err(FactorizationError::NonPositiveEps(_))));
    }

    #[test]
    fn sextic_plan_values() {
        let plan = SexticPlan::new(0.1, 0.18).unwrap();
        assert!((plan.inv_alpha_sq - 0.04717334509576015).abs() < 1e-15);
        assert!((plan.lag_lap - 3.0 * plan.inv_alpha_sq).abs() < 1e-16);
        assert!((plan.lag_bilap - 3.0 * plan.inv_alpha_sq * plan.inv_alpha_sq).abs() < 1e-16);

        // Δt ε⁴ = 1 → 1/α² = 1
        let plan = SexticPlan::new(1.0 / 0.2_f64.powi(4), 0.2).unwrap();
        assert!((plan.inv_alpha_sq - 1.0).abs() < 1e-12);

        // ε → 0 drives the operator toward the identity
        let plan = SexticPlan::new(0.1, 1e-8).unwrap();
        assert!(plan.inv_alpha_sq < 1e-11);
    }

    fn sine_field(grid: Grid1D) -> Field1D {
        Field1D::from_fn(grid, f64::sin)
    }

    #[test]
    fn quartic_inverse_fixes_constants() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 64).unwrap();
        for &dt in &[0.05, 0.01] {
            let plan = QuarticPlan::backward_euler(dt, 0.18).unwrap();
            let op = Quartic1D::new(plan, grid, 4).unwrap();
            let out = apply_quartic_inverse(&Field1D::constant(grid, 2.0), &op);
            let mut worst = 0.0_f64;
            for &v in out.values() {
                worst = worst.max((v - 2.0).abs());
            }
            assert!(worst < 1e-12, "dt={dt}: {worst}");
        }
    }

    #[test]
    fn quartic_inverse_sine_symbol() {
        // sin(x) is an eigenfunction: result = sin/((1+1/α₁²)(1+1/α₂²))
        let grid = Grid1D::new(0.0, 2.0 * PI, 512).unwrap();
        let plan = QuarticPlan::backward_euler(0.05, 0.18).unwrap();
        let op = Quartic1D::new(plan, grid, 6).unwrap();
        let out = apply_quartic_inverse(&sine_field(grid), &op);
        let symbol = 1.0 / ((1.0 + plan.inv_alpha1_sq) * (1.0 + plan.inv_alpha2_sq));
        let mut worst = 0.0_f64;
        for j in 0..grid.len() {
            worst = worst.max((out.values()[j] - symbol * grid.x(j).sin()).abs());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn sextic_inverse_sine_symbol_and_constants() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 512).unwrap();
        let plan = SexticPlan::new(0.1, 0.18).unwrap();
        let op = Sextic1D::new(plan, grid, 6).unwrap();

        let out = apply_sextic_inverse(&Field1D::constant(grid, -1.5), &op);
        let mut worst = 0.0_f64;
        for &v in out.values() {
            worst = worst.max((v + 1.5).abs());
        }
        assert!(worst < 1e-12);

        let out = apply_sextic_inverse(&sine_field(grid), &op);
        let symbol = 1.0 / (1.0 + plan.inv_alpha_sq).powi(3);
        let mut worst = 0.0_f64;
        for j in 0..grid.len() {
            worst = worst.max((out.values()[j] - symbol * grid.x(j).sin()).abs());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn lap_channel_matches_p_inv_of_dxx() {
        // on sin(kx): lap_channel should produce -k²·(symbol product)·sin
        let grid = Grid1D::new(0.0, 2.0 * PI, 512).unwrap();
        let plan = QuarticPlan::backward_euler(0.05, 0.18).unwrap();
        let op = Quartic1D::new(plan, grid, 6).unwrap();
        let k = 3.0;
        let g = Field1D::from_fn(grid, |x| (k * x).sin());
        let out = op.lap_channel(&g);
        let expect =
            -(k * k) / ((1.0 + k * k * plan.inv_alpha1_sq) * (1.0 + k * k * plan.inv_alpha2_sq));
        let mut worst = 0.0_f64;
        for j in 0..grid.len() {
            worst = worst.max((out.values()[j] - expect * (k * grid.x(j)).sin()).abs());
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn bilap_channel_matches_p_inv_of_dxxxx() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 512).unwrap();
        let plan = QuarticPlan::backward_euler(0.05, 0.18).unwrap();
        let op = Quartic1D::new(plan, grid, 6).unwrap();
        let k = 2.0;
        let w = Field1D::from_fn(grid, |x| (k * x).cos());
        let out = op.bilap_channel(&w);
        let k2 = k * k;
        let expect = k2 * k2 / ((1.0 + k2 * plan.inv_alpha1_sq) * (1.0 + k2 * plan.inv_alpha2_sq));
        let mut worst = 0.0_f64;
        for j in 0..grid.len() {
            worst = worst.max((out.values()[j] - expect * (k * grid.x(j)).cos()).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn branch_continuity_across_bifurcation() {
        // the assembled inverse applied to sin varies continuously in Δt
        // across the switch point Δt = ε²
        let grid = Grid1D::new(0.0, 2.0 * PI, 128).unwrap();
        let eps = 0.18;
        let e2 = eps * eps;
        let v = sine_field(grid);
        let below = {
            let plan = QuarticPlan::backward_euler(e2 * (1.0 - 1e-9), eps).unwrap();
            assert_eq!(plan.mode, QuarticMode::CompletedSquare);
            apply_quartic_inverse(&v, &Quartic1D::new(plan, grid, 4).unwrap())
        };
        let above = {
            let plan = QuarticPlan::backward_euler(e2 * (1.0 + 1e-9), eps).unwrap();
            assert_eq!(plan.mode, QuarticMode::Factored);
            apply_quartic_inverse(&v, &Quartic1D::new(plan, grid, 4).unwrap())
        };
        assert!(below.diff_max_norm(&above) < 1e-8);
    }

    #[test]
    fn factored_and_square_agree_at_tie() {
        let grid = Grid1D::new(0.0, 2.0 * PI, 128).unwrap();
        let eps = 0.18;
        let plan = QuarticPlan::backward_euler(eps * eps, eps).unwrap();
        assert_eq!(plan.mode, QuarticMode::Factored);
        // with a zero discriminant both Helmholtz parameters coincide
        assert_eq!(plan.inv_alpha1_sq, plan.inv_alpha2_sq);
        let op = Quartic1D::new(plan, grid, 4).unwrap();
        let out = apply_quartic_inverse(&Field1D::constant(grid, 1.0), &op);
        assert!(max_norm(&out) > 0.999 && max_norm(&out) < 1.001);
    }
}
