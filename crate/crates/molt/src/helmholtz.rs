//! O(N) application of the modified Helmholtz inverse on a periodic line.
//!
//! The operator is `L = I - ∂xx/α²` with Green's function `(α/2)e^{-α|x|}`,
//! so `L⁻¹[v](x) = I[v](x) + B_a e^{-α(x-a)} + B_b e^{-α(b-x)}` where
//! `I[v](x) = (α/2) ∫_a^b e^{-α|x-x'|} v(x') dx'`.
//!
//! The particular solution splits into one-sided pieces `I = I^L + I^R`
//! which satisfy exponential recursions
//! `I^L_j = e^{-νh} I^L_{j-1} + J^L_j`, so one left-to-right and one
//! right-to-left sweep evaluate the convolution at every node in O(M·N).
//! The local integrals `J^L_j, J^R_j` use an order-M quadrature: the
//! degree-M Lagrange interpolant of `v` on the centered (M+1)-point stencil
//! is integrated exactly against the exponential kernel over one cell.
//! Periodic closure: `B_a = I_N/(1-μ)`, `B_b = I_0/(1-μ)`, `μ = e^{-α(b-a)}`.

use crate::grid::{Field1D, Grid1D, SolverField};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("helmholtz parameter must be positive, got alpha = {0}")]
    NonPositiveAlpha(f64),
    #[error("unsupported quadrature order M = {0} (supported: 2, 4, 6)")]
    UnsupportedOrder(usize),
}

/// Precomputed quadrature weights and closure constants for one (α, grid, M).
#[derive(Debug, Clone)]
pub struct HelmholtzPlan {
    alpha: f64,
    grid: Grid1D,
    m: usize,
    nu: f64,
    d: f64,
    mu: f64,
    /// Left local-integral weights on stencil offsets `-M/2 ..= M/2`,
    /// normalized so `J^L_j ≈ ν ∫ e^{ν t} v dt` (the α/2 kernel factor is
    /// applied when the sweeps are combined).
    wl: Vec<f64>,
    /// Right weights; mirror image of `wl`.
    wr: Vec<f64>,
}

impl HelmholtzPlan {
    pub fn new(alpha: f64, grid: Grid1D, m: usize) -> Result<Self, PlanError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(PlanError::NonPositiveAlpha(alpha));
        }
        if !matches!(m, 2 | 4 | 6) {
            return Err(PlanError::UnsupportedOrder(m));
        }
        let nu = alpha * grid.h();
        let d = (-nu).exp();
        // μ = d^n, accumulated the same way the sweeps accumulate decay so the
        // closure cancels the particular solution exactly on constants.
        let mut mu = 1.0;
        for _ in 0..grid.len() {
            mu *= d;
        }
        let wl = left_weights(nu, m);
        let wr: Vec<f64> = wl.iter().rev().copied().collect();
        Ok(Self { alpha, grid, m, nu, d, mu, wl, wr })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Per-cell decay factor `e^{-ν}`.
    pub fn decay(&self) -> f64 {
        self.d
    }

    /// Whole-domain decay `e^{-α(b-a)}`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weights_left(&self) -> &[f64] {
        &self.wl
    }

    pub fn weights_right(&self) -> &[f64] {
        &self.wr
    }

    /// The (P, Q, R) weights of the second-order quadrature,
    /// `J^L_j = P v_j + Q v_{j-1} + R (v_{j+1} - 2 v_j + v_{j-1})`.
    /// Only defined for M = 2.
    pub fn pqr(&self) -> (f64, f64, f64) {
        assert_eq!(self.m, 2, "P,Q,R form is specific to M = 2");
        let r = self.wl[2];
        let q = self.wl[0] - r;
        let p = self.wl[1] + 2.0 * r;
        (p, q, r)
    }
}

/// Exponential moments `μ_k = ν ∫_{-1}^{0} t^k e^{ν t} dt`, k = 0..=kmax.
///
/// A power series is used for small ν (the upward recurrence divides by ν
/// and loses digits there); for ν ≥ 2 the recurrence is stable.
fn exp_moments(nu: f64, kmax: usize) -> Vec<f64> {
    let d = (-nu).exp();
    let mut mu = vec![0.0; kmax + 1];
    if nu < 2.0 {
        for (k, slot) in mu.iter_mut().enumerate() {
            // μ_k = Σ_m ν^{m+1}/m! · (-1)^{k+m}/(k+m+1)
            let mut term_pow = nu; // ν^{m+1}/m!
            let mut sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut acc = 0.0;
            let mut m = 0usize;
            loop {
                let term = sign * term_pow / (k + m + 1) as f64;
                acc += term;
                if term.abs() < 1e-22 && m > 2 {
                    break;
                }
                m += 1;
                term_pow *= nu / m as f64;
                sign = -sign;
            }
            *slot = acc;
        }
    } else {
        mu[0] = 1.0 - d;
        for k in 1..=kmax {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            mu[k] = sign * d - (k as f64 / nu) * mu[k - 1];
        }
    }
    mu
}

/// Weights for `J^L_j = ν ∫_{-1}^{0} e^{ν t} ℓ_i(t) dt` with Lagrange basis
/// `ℓ_i` on the integer stencil `t_i = i - M/2`, i = 0..=M.
fn left_weights(nu: f64, m: usize) -> Vec<f64> {
    let moments = exp_moments(nu, m);
    let nodes: Vec<f64> = (0..=m).map(|i| i as f64 - (m / 2) as f64).collect();
    let mut weights = vec![0.0; m + 1];
    for i in 0..=m {
        // expand ℓ_i(t) = Π_{j≠i} (t - t_j)/(t_i - t_j) into monomials
        let mut coef = vec![0.0; m + 1];
        coef[0] = 1.0;
        let mut deg = 0usize;
        let mut denom = 1.0;
        for j in 0..=m {
            if j == i {
                continue;
            }
            denom *= nodes[i] - nodes[j];
            // coef *= (t - t_j)
            for k in (0..=deg).rev() {
                coef[k + 1] += coef[k];
                coef[k] *= -nodes[j];
            }
            deg += 1;
        }
        weights[i] = coef
            .iter()
            .zip(&moments)
            .map(|(c, mom)| c * mom)
            .sum::<f64>()
            / denom;
    }
    weights
}

/// One-sided sweeps and their sum for a single convolution.
#[derive(Debug, Clone)]
pub struct ConvolutionResult {
    /// Particular solution `I[v] = I^L + I^R` at the stored nodes.
    pub i: Field1D,
    pub il: Field1D,
    pub ir: Field1D,
    /// Endpoint values needed by the periodic closure.
    pub i0: f64,
    pub i_n: f64,
}

/// Reusable per-line scratch for the sweeps (avoids reallocation in 2D).
#[derive(Debug, Clone)]
pub struct LineBuf {
    il: Vec<f64>,
    ir: Vec<f64>,
}

impl LineBuf {
    pub fn new(n: usize) -> Self {
        Self { il: vec![0.0; n + 1], ir: vec![0.0; n + 1] }
    }

    fn ensure(&mut self, n: usize) {
        if self.il.len() != n + 1 {
            self.il.resize(n + 1, 0.0);
            self.ir.resize(n + 1, 0.0);
        }
    }
}

#[inline]
fn wrap(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Run both sweeps over one periodic line. Fills `buf.il`, `buf.ir` with the
/// raw (kernel-ν-normalized) one-sided sums at nodes 0..=n; the α/2-normalized
/// particular solution is `0.5 * (il[j] + ir[j])`.
fn sweep_line(plan: &HelmholtzPlan, src: &[f64], buf: &mut LineBuf) {
    let n = src.len();
    buf.ensure(n);
    let half = (plan.m / 2) as i64;
    let d = plan.d;
    let (wl, wr) = (&plan.wl, &plan.wr);

    buf.il[0] = 0.0;
    for j in 1..=n {
        let mut local = 0.0;
        for (i, &w) in wl.iter().enumerate() {
            local += w * src[wrap(j as i64 + i as i64 - half, n)];
        }
        buf.il[j] = d * buf.il[j - 1] + local;
    }
    buf.ir[n] = 0.0;
    for j in (0..n).rev() {
        let mut local = 0.0;
        for (i, &w) in wr.iter().enumerate() {
            local += w * src[wrap(j as i64 + i as i64 - half, n)];
        }
        buf.ir[j] = d * buf.ir[j + 1] + local;
    }
}

/// Apply `L⁻¹` with periodic closure to one line, writing into `dst`.
pub fn solve_line(plan: &HelmholtzPlan, src: &[f64], dst: &mut [f64], buf: &mut LineBuf) {
    let n = src.len();
    debug_assert_eq!(n, plan.grid.len());
    debug_assert_eq!(n, dst.len());
    sweep_line(plan, src, buf);
    let i0 = 0.5 * (buf.il[0] + buf.ir[0]);
    let i_n = 0.5 * (buf.il[n] + buf.ir[n]);
    let mu = plan.mu;
    debug_assert!(mu < 1.0);
    let ba = i_n / (1.0 - mu);
    let bb = i0 / (1.0 - mu);

    // homogeneous decay e^{-α(x_j-a)} = d^j and e^{-α(b-x_j)} = d^{n-j},
    // built by repeated multiplication (no per-point exp)
    let d = plan.d;
    let mut pa = 1.0;
    for j in 0..n {
        dst[j] = 0.5 * (buf.il[j] + buf.ir[j]) + ba * pa;
        pa *= d;
    }
    let mut pb = d;
    for j in (0..n).rev() {
        dst[j] += bb * pb;
        pb *= d;
    }
}

/// Green's-function convolution `I[v]` with its one-sided parts.
pub fn fast_convolve(v: &Field1D, plan: &HelmholtzPlan) -> ConvolutionResult {
    assert_eq!(v.grid(), &plan.grid, "field grid must match plan grid");
    let n = v.grid().len();
    let mut buf = LineBuf::new(n);
    sweep_line(plan, v.values(), &mut buf);
    let mut i = Field1D::zeros(*v.grid());
    let mut il = Field1D::zeros(*v.grid());
    let mut ir = Field1D::zeros(*v.grid());
    for j in 0..n {
        il.values_mut()[j] = 0.5 * buf.il[j];
        ir.values_mut()[j] = 0.5 * buf.ir[j];
        i.values_mut()[j] = 0.5 * (buf.il[j] + buf.ir[j]);
    }
    let i0 = 0.5 * (buf.il[0] + buf.ir[0]);
    let i_n = 0.5 * (buf.il[n] + buf.ir[n]);
    ConvolutionResult { i, il, ir, i0, i_n }
}

/// `L⁻¹[v]` on a periodic line.
pub fn apply_linv_periodic(v: &Field1D, plan: &HelmholtzPlan) -> Field1D {
    assert_eq!(v.grid(), &plan.grid, "field grid must match plan grid");
    let n = v.grid().len();
    let mut buf = LineBuf::new(n);
    let mut out = Field1D::zeros(*v.grid());
    solve_line(plan, v.values(), out.values_mut(), &mut buf);
    out
}

/// `D[v] = v - L⁻¹[v]`, the building block of the splitting corrections.
pub fn apply_d(v: &Field1D, plan: &HelmholtzPlan) -> Field1D {
    let mut w = apply_linv_periodic(v, plan);
    w.scale(-1.0);
    w.add(v);
    w
}

/// `L⁻¹[∂xx v] = α²(L⁻¹ - I)[v]`, applied without ever forming `∂xx v`.
pub fn apply_linv_dxx(v: &Field1D, plan: &HelmholtzPlan) -> Field1D {
    let a2 = plan.alpha * plan.alpha;
    let mut w = apply_linv_periodic(v, plan);
    w.sub(v);
    w.scale(a2);
    w
}
