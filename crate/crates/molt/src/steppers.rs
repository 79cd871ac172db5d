//! Time integrators built on the factored implicit operators.
//!
//! Every method reduces to the same lagged fixed-point solve. For a
//! whole-step method the implicit equation is
//!
//! `(I - cΔt·Δ + dΔt·Δ²) v^{n+1} = base + κ·Δ f̃(v^{n+1}) [+ fixed terms]`
//!
//! and one sweep inverts the factored operator against the lagged
//! right-hand side; SDIRK stages solve the same shape for the stage slope
//! `K` with an extra `-ε²Δ²` channel; SDC corrections add quadrature
//! combinations of the previous level through the `Δ` and `Δ²` channels.
//! Each method only supplies its `(c, d)` operator constants, its base
//! combination of history levels, and its right-hand-side scale κ:
//!
//! | method | c        | d           | κ          |
//! |--------|----------|-------------|------------|
//! | BE     | 2        | ε²          | Δt         |
//! | BDF2   | 4/3      | (2/3)ε²     | (2/3)Δt    |
//! | BDF3   | 12/11    | (6/11)ε²    | (6/11)Δt   |
//! | SDIRK  | 2η       | ηε²         | 1 (on K)   |
//! | SDC    | 2        | ε²          | Δt         |
//!
//! BDF methods start up with SDIRK2 steps (BDF2 needs one, BDF3 two) so
//! the global order is preserved.

use crate::factorization::{FactorizationError, ImplicitOperator, QuarticPlan};
use crate::grid::{Grid1D, Grid2D, SolverField};
use crate::models::ChModel;
use crate::factorization::Quartic1D;
use crate::split2d::Quartic2D;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("fixed-point iteration did not converge in {iterations} sweeps (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("method needs {needed} history levels but only {available} are populated")]
    MissingHistory { needed: usize, available: usize },
    #[error(transparent)]
    Factorization(#[from] FactorizationError),
}

/// Fixed-point iteration controls shared by all steppers.
#[derive(Debug, Clone, Copy)]
pub struct IterationCfg {
    /// Tolerance on the max-norm iterate difference.
    pub n_tol: f64,
    /// Sweep cap; hitting it raises [`StepError::NonConvergence`].
    pub n_max_it: usize,
}

impl IterationCfg {
    pub fn new(n_tol: f64, n_max_it: usize) -> Self {
        assert!(n_tol > 0.0 && n_max_it >= 1);
        Self { n_tol, n_max_it }
    }
}

/// Iterate `sweep` from `initial` until the max-norm difference between
/// consecutive iterates drops below `n_tol`. Returns the converged iterate
/// and the number of sweeps used.
pub fn fixed_point_solve<F: SolverField>(
    initial: F,
    mut sweep: impl FnMut(&F) -> F,
    cfg: &IterationCfg,
) -> Result<(F, usize), StepError> {
    let mut cur = initial;
    let mut residual = f64::INFINITY;
    for k in 1..=cfg.n_max_it {
        let next = sweep(&cur);
        residual = next.diff_max_norm(&cur);
        cur = next;
        if residual < cfg.n_tol {
            return Ok((cur, k));
        }
        if !residual.is_finite() {
            return Err(StepError::NonConvergence { iterations: k, residual });
        }
    }
    Err(StepError::NonConvergence { iterations: cfg.n_max_it, residual })
}

/// Solve `A X = precomp-source + κ·Δ G(X)` by the lagged sweep
/// `X^{k+1} = precomp + κ·lap_channel(G(X^k) + (S/κ)X^k) + C[X^k]`.
///
/// `precomp` must already hold `P⁻¹[base]` plus any iteration-independent
/// channel terms; `S` (completed-square lag) and `C` (2D splitting
/// correction) come from the operator.
pub fn solve_implicit<T: ImplicitOperator>(
    op: &T,
    precomp: &T::Field,
    kappa: f64,
    g_of: impl Fn(&T::Field) -> T::Field,
    guess: T::Field,
    cfg: &IterationCfg,
) -> Result<(T::Field, usize), StepError> {
    let s_over_k = op.lag_coefficient() / kappa;
    fixed_point_solve(
        guess,
        |xk| {
            let mut g = g_of(xk);
            if s_over_k != 0.0 {
                g.axpy(s_over_k, xk);
            }
            let mut next = op.lap_channel(&g);
            next.scale(kappa);
            next.add(precomp);
            op.add_splitting_correction(&mut next, xk);
            next
        },
        cfg,
    )
}

/// One whole-step CH solve: `A v = base + κ·Δ f̃(v)`.
pub fn ch_whole_step<T: ImplicitOperator>(
    op: &T,
    base: &T::Field,
    kappa: f64,
    guess: T::Field,
    cfg: &IterationCfg,
) -> Result<(T::Field, usize), StepError> {
    let precomp = op.inv_all(base);
    solve_implicit(op, &precomp, kappa, |xk| xk.map(ChModel::f_tilde), guess, cfg)
}

/// Builds the dimension-specific operator for a quartic plan; lets the
/// steppers stay generic over 1D/2D.
pub trait QuarticFactory: Sync {
    type Op: ImplicitOperator;
    fn build(&self, plan: QuarticPlan) -> Result<Self::Op, FactorizationError>;
}

#[derive(Debug, Clone, Copy)]
pub struct Factory1D {
    pub grid: Grid1D,
    pub m: usize,
}

impl QuarticFactory for Factory1D {
    type Op = Quartic1D;
    fn build(&self, plan: QuarticPlan) -> Result<Quartic1D, FactorizationError> {
        Quartic1D::new(plan, self.grid, self.m)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Factory2D {
    pub grid: Grid2D,
    pub m: usize,
}

impl QuarticFactory for Factory2D {
    type Op = Quartic2D;
    fn build(&self, plan: QuarticPlan) -> Result<Quartic2D, FactorizationError> {
        Quartic2D::new(plan, self.grid, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Be,
    Bdf2,
    Bdf3,
    Sdirk2,
    Sdirk3,
    Sdc2,
    /// Third-order SDC; the payload is the interpolation order P ∈ {2, 3}
    /// of the residual quadrature (P corrections are performed).
    Sdc3 { p: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Be => "be",
            Method::Bdf2 => "bdf2",
            Method::Bdf3 => "bdf3",
            Method::Sdirk2 => "sdirk2",
            Method::Sdirk3 => "sdirk3",
            Method::Sdc2 => "sdc2",
            Method::Sdc3 { p: 2 } => "sdc3",
            Method::Sdc3 { .. } => "sdc3p3",
        }
    }
}

/// SDIRK2 diagonal `η = 1 - √2/2`.
pub const SDIRK2_ETA: f64 = 0.292_893_218_813_452_4;

/// SDIRK3 diagonal: the root of `η³ - 3η² + (3/2)η - 1/6` near 0.4359.
pub const SDIRK3_ETA: f64 = 0.435_866_521_508_459_7;

/// Butcher data for the singly diagonal implicit RK schemes.
///
/// SDIRK2 (Alexander): c = [η, 1], b = [1-η, η].
/// SDIRK3 (Alexander, stiffly accurate, L-stable):
/// c = [η, (1+η)/2, 1], b = [b₁, b₂, η] with
/// b₁ = -(6η² - 16η + 1)/4, b₂ = (6η² - 20η + 5)/4.
#[derive(Debug, Clone)]
struct SdirkTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    eta: f64,
}

impl SdirkTableau {
    fn order2() -> Self {
        let eta = SDIRK2_ETA;
        Self { a: vec![vec![eta], vec![1.0 - eta, eta]], b: vec![1.0 - eta, eta], eta }
    }

    fn order3() -> Self {
        let eta = SDIRK3_ETA;
        let b1 = -(6.0 * eta * eta - 16.0 * eta + 1.0) / 4.0;
        let b2 = (6.0 * eta * eta - 20.0 * eta + 5.0) / 4.0;
        Self {
            a: vec![vec![eta], vec![(1.0 - eta) / 2.0, eta], vec![b1, b2, eta]],
            b: vec![b1, b2, eta],
            eta,
        }
    }
}

struct SdirkScheme<T: ImplicitOperator> {
    op: T,
    tableau: SdirkTableau,
    eps_sq: f64,
    dt: f64,
}

impl<T: ImplicitOperator> SdirkScheme<T> {
    fn new<F>(factory: &F, tableau: SdirkTableau, dt: f64, eps: f64) -> Result<Self, StepError>
    where
        F: QuarticFactory<Op = T>,
    {
        let plan = QuarticPlan::sdirk_stage(dt, eps, tableau.eta)?;
        Ok(Self { op: factory.build(plan)?, tableau, eps_sq: eps * eps, dt })
    }

    /// Advance one step; stage slopes start from zero fields.
    fn step(&self, v: &T::Field, cfg: &IterationCfg) -> Result<(T::Field, usize), StepError> {
        let stages = self.tableau.b.len();
        let eta_dt = self.tableau.eta * self.dt;
        let mut slopes: Vec<T::Field> = Vec::with_capacity(stages);
        let mut total_its = 0;
        for i in 0..stages {
            let mut stage_base = v.clone();
            for (j, kj) in slopes.iter().enumerate() {
                stage_base.axpy(self.dt * self.tableau.a[i][j], kj);
            }
            let mut precomp = self.op.bilap_channel(&stage_base);
            precomp.scale(-self.eps_sq);
            let g_of = |kk: &T::Field| {
                let mut arg = stage_base.clone();
                arg.axpy(eta_dt, kk);
                let mut g = arg.map(ChModel::f_tilde);
                g.axpy(2.0, &stage_base);
                g
            };
            let (ki, its) =
                solve_implicit(&self.op, &precomp, 1.0, g_of, v.zeros_like(), cfg)?;
            total_its += its;
            slopes.push(ki);
        }
        let mut vnew = v.clone();
        for (bi, ki) in self.tableau.b.iter().zip(&slopes) {
            vnew.axpy(self.dt * bi, ki);
        }
        Ok((vnew, total_its))
    }
}

/// Integration weights `∫_{t0}^{t1} ℓ_m(τ) dτ` of the Lagrange basis on
/// `nodes` (in step-index units, interval likewise).
pub fn lagrange_integral_weights(nodes: &[f64], t0: f64, t1: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut coef = vec![0.0; n];
        coef[0] = 1.0;
        let mut deg = 0usize;
        let mut denom = 1.0;
        for (j, &tj) in nodes.iter().enumerate() {
            if j == i {
                continue;
            }
            denom *= nodes[i] - tj;
            for k in (0..=deg).rev() {
                coef[k + 1] += coef[k];
                coef[k] *= -tj;
            }
            deg += 1;
        }
        let integral: f64 = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c * (t1.powi(k as i32 + 1) - t0.powi(k as i32 + 1)) / (k as f64 + 1.0))
            .sum();
        weights[i] = integral / denom;
    }
    weights
}

struct SdcLevel<F> {
    v: F,
    steps: usize,
    /// Recent node values `(step index, value)`, newest last.
    ring: VecDeque<(usize, F)>,
}

impl<F: SolverField> SdcLevel<F> {
    fn new(v0: F) -> Self {
        let mut ring = VecDeque::new();
        ring.push_back((0, v0.clone()));
        Self { v: v0, steps: 0, ring }
    }

    fn push(&mut self, v: F) {
        self.steps += 1;
        self.v = v.clone();
        self.ring.push_back((self.steps, v));
        while self.ring.len() > 8 {
            self.ring.pop_front();
        }
    }

    fn at(&self, step: usize) -> &F {
        self.ring
            .iter()
            .find(|(s, _)| *s == step)
            .map(|(_, v)| v)
            .unwrap_or_else(|| panic!("SDC ring does not hold node {step}"))
    }
}

struct SdcKit<T: ImplicitOperator> {
    op: T,
    /// Number of correction levels; level j uses quadrature order P = j.
    corrections: usize,
    eps_sq: f64,
    dt: f64,
    levels: Vec<SdcLevel<T::Field>>,
}

impl<T: ImplicitOperator> SdcKit<T> {
    fn seed(&mut self, v0: &T::Field) {
        self.levels = (0..=self.corrections).map(|_| SdcLevel::new(v0.clone())).collect();
    }

    /// Advance level `j` until it has completed `target` steps.
    fn advance_level(
        &mut self,
        j: usize,
        target: usize,
        cfg: &IterationCfg,
        its: &mut usize,
    ) -> Result<(), StepError> {
        while self.levels[j].steps < target {
            let n = self.levels[j].steps;
            if j == 0 {
                let base = self.levels[0].v.clone();
                let (vnew, k) =
                    ch_whole_step(&self.op, &base, self.dt, base.clone(), cfg)?;
                *its += k;
                self.levels[0].push(vnew);
                continue;
            }
            // the provider level must hold nodes up to max(n+1, P)
            let p = j;
            let provider_target = (n + 1).max(p);
            self.advance_level(j - 1, provider_target, cfg, its)?;

            let (nodes, interval): (Vec<usize>, (f64, f64)) = if n >= p.saturating_sub(1) {
                ((n + 1 - p..=n + 1).collect(), ((n) as f64, (n + 1) as f64))
            } else {
                ((0..=p).collect(), (n as f64, (n + 1) as f64))
            };
            let positions: Vec<f64> = nodes.iter().map(|&s| s as f64).collect();
            let qw = lagrange_integral_weights(&positions, interval.0, interval.1);

            // c_m = q̃_m - [node == n+1]; accumulate Σ c_m f(v_m) and Σ c_m v_m
            let mut f_acc = self.levels[j].v.zeros_like();
            let mut v_acc = self.levels[j].v.zeros_like();
            for (&node, &w) in nodes.iter().zip(&qw) {
                let c = if node == n + 1 { w - 1.0 } else { w };
                if c == 0.0 {
                    continue;
                }
                let vm = self.levels[j - 1].at(node);
                f_acc.axpy(c, &vm.map(ChModel::f));
                v_acc.axpy(c, vm);
            }

            let base = self.levels[j].v.clone();
            let mut precomp = self.op.inv_all(&base);
            let mut lap_part = self.op.lap_channel(&f_acc);
            lap_part.scale(self.dt);
            precomp.add(&lap_part);
            let mut bilap_part = self.op.bilap_channel(&v_acc);
            bilap_part.scale(-self.eps_sq * self.dt);
            precomp.add(&bilap_part);

            let (vnew, k) = solve_implicit(
                &self.op,
                &precomp,
                self.dt,
                |xk| xk.map(ChModel::f_tilde),
                base,
                cfg,
            )?;
            *its += k;
            self.levels[j].push(vnew);
        }
        Ok(())
    }
}

enum Kind<T: ImplicitOperator> {
    Be { op: T },
    Bdf { order: usize, op: T, kappa: f64, startup: SdirkScheme<T> },
    Sdirk { scheme: SdirkScheme<T> },
    Sdc(SdcKit<T>),
}

/// Solution state carried between steps.
#[derive(Debug, Clone)]
pub struct SolverState<F> {
    pub v: F,
    pub t: f64,
    /// Previous levels, most recent first (`prev[0] = v^{n-1}`).
    pub prev: Vec<F>,
    pub steps_taken: usize,
}

impl<F: SolverField> SolverState<F> {
    pub fn new(v0: F) -> Self {
        Self { v: v0, t: 0.0, prev: Vec::new(), steps_taken: 0 }
    }
}

/// A fixed-step CH integrator for one method at one Δt.
pub struct ChStepper<T: ImplicitOperator> {
    pub method: Method,
    pub dt: f64,
    pub cfg: IterationCfg,
    kind: Kind<T>,
}

impl<T: ImplicitOperator> ChStepper<T> {
    pub fn new<F>(
        factory: &F,
        method: Method,
        dt: f64,
        model: ChModel,
        cfg: IterationCfg,
    ) -> Result<Self, StepError>
    where
        F: QuarticFactory<Op = T>,
    {
        let eps = model.eps;
        let kind = match method {
            Method::Be => Kind::Be { op: factory.build(QuarticPlan::backward_euler(dt, eps)?)? },
            Method::Bdf2 => Kind::Bdf {
                order: 2,
                op: factory.build(QuarticPlan::bdf2(dt, eps)?)?,
                kappa: 2.0 / 3.0 * dt,
                startup: SdirkScheme::new(factory, SdirkTableau::order2(), dt, eps)?,
            },
            Method::Bdf3 => Kind::Bdf {
                order: 3,
                op: factory.build(QuarticPlan::bdf3(dt, eps)?)?,
                kappa: 6.0 / 11.0 * dt,
                startup: SdirkScheme::new(factory, SdirkTableau::order2(), dt, eps)?,
            },
            Method::Sdirk2 => Kind::Sdirk {
                scheme: SdirkScheme::new(factory, SdirkTableau::order2(), dt, eps)?,
            },
            Method::Sdirk3 => Kind::Sdirk {
                scheme: SdirkScheme::new(factory, SdirkTableau::order3(), dt, eps)?,
            },
            Method::Sdc2 => Kind::Sdc(SdcKit {
                op: factory.build(QuarticPlan::backward_euler(dt, eps)?)?,
                corrections: 1,
                eps_sq: eps * eps,
                dt,
                levels: Vec::new(),
            }),
            Method::Sdc3 { p } => {
                assert!(p == 2 || p == 3, "SDC3 supports P ∈ {{2, 3}}");
                Kind::Sdc(SdcKit {
                    op: factory.build(QuarticPlan::backward_euler(dt, eps)?)?,
                    corrections: p,
                    eps_sq: eps * eps,
                    dt,
                    levels: Vec::new(),
                })
            }
        };
        Ok(Self { method, dt, cfg, kind })
    }

    /// Advance the state by one Δt. Returns the number of fixed-point
    /// sweeps used (summed over stages and correction levels).
    pub fn step(&mut self, state: &mut SolverState<T::Field>) -> Result<usize, StepError> {
        let dt = self.dt;
        let cfg = self.cfg;
        let its = match &mut self.kind {
            Kind::Be { op } => {
                let (vnew, its) = ch_whole_step(op, &state.v, dt, state.v.clone(), &cfg)?;
                rotate_history(state, vnew, 0);
                its
            }
            Kind::Bdf { order, op, kappa, startup } => {
                let need = *order - 1;
                if state.prev.len() < need {
                    // startup levels come from SDIRK2 at the same Δt
                    let (vnew, its) = startup.step(&state.v, &cfg)?;
                    rotate_history(state, vnew, need);
                    its
                } else {
                    let base = match order {
                        2 => {
                            let mut b = state.v.clone();
                            b.scale(4.0 / 3.0);
                            b.axpy(-1.0 / 3.0, &state.prev[0]);
                            b
                        }
                        _ => {
                            let mut b = state.v.clone();
                            b.scale(18.0 / 11.0);
                            b.axpy(-9.0 / 11.0, &state.prev[0]);
                            b.axpy(2.0 / 11.0, &state.prev[1]);
                            b
                        }
                    };
                    let (vnew, its) = ch_whole_step(op, &base, *kappa, state.v.clone(), &cfg)?;
                    rotate_history(state, vnew, need);
                    its
                }
            }
            Kind::Sdirk { scheme } => {
                let (vnew, its) = scheme.step(&state.v, &cfg)?;
                rotate_history(state, vnew, 0);
                its
            }
            Kind::Sdc(kit) => {
                if kit.levels.is_empty() {
                    kit.seed(&state.v);
                }
                let mut its = 0;
                let top = kit.corrections;
                let target = kit.levels[top].steps + 1;
                kit.advance_level(top, target, &cfg, &mut its)?;
                state.v = kit.levels[top].v.clone();
                state.prev.clear();
                its
            }
        };
        state.t += dt;
        state.steps_taken += 1;
        Ok(its)
    }
}

fn rotate_history<F: SolverField>(state: &mut SolverState<F>, vnew: F, keep: usize) {
    if keep > 0 {
        state.prev.insert(0, state.v.clone());
        state.prev.truncate(keep);
    }
    state.v = vnew;
}

/// Variable-step BDF2 base combination and κ for step ratio `r = Δt_n/Δt_{n-1}`:
/// `v^{n+1} - (1+r)²/(1+2r)·v^n + r²/(1+2r)·v^{n-1} = Δt_n (1+r)/(1+2r) F(v^{n+1})`.
pub fn bdf2_variable_coeffs(r: f64) -> (f64, f64, f64) {
    let den = 1.0 + 2.0 * r;
    ((1.0 + r) * (1.0 + r) / den, -r * r / den, (1.0 + r) / den)
}

/// One variable-step BDF2 solve from `(v_prev at t-Δt_prev, v at t)` to `t+Δt`.
/// Used as the high-order predictor inside the adaptive controller.
pub fn bdf2_variable_step<F, T>(
    factory: &F,
    model: ChModel,
    v: &T::Field,
    v_prev: &T::Field,
    dt_prev: f64,
    dt: f64,
    cfg: &IterationCfg,
) -> Result<(T::Field, usize), StepError>
where
    T: ImplicitOperator,
    F: QuarticFactory<Op = T>,
{
    let r = dt / dt_prev;
    let (a0, a1, beta) = bdf2_variable_coeffs(r);
    let plan = QuarticPlan::new(dt, 2.0 * beta, beta * model.eps * model.eps)?;
    let op = factory.build(plan)?;
    let mut base = v.clone();
    base.scale(a0);
    base.axpy(a1, v_prev);
    ch_whole_step(&op, &base, beta * dt, v.clone(), cfg)
}

/// One-shot SDC2 value from `v` over `dt`, reusing an already computed BE
/// step when available. Returns `(v_sdc2, v_be, iterations)`.
pub fn sdc2_predictor_step<T: ImplicitOperator>(
    op: &T,
    eps: f64,
    v: &T::Field,
    v_be: Option<&T::Field>,
    dt: f64,
    cfg: &IterationCfg,
) -> Result<(T::Field, T::Field, usize), StepError> {
    let mut its = 0;
    let v_be = match v_be {
        Some(b) => b.clone(),
        None => {
            let (b, k) = ch_whole_step(op, v, dt, v.clone(), cfg)?;
            its += k;
            b
        }
    };
    // trapezoid correction: c_{n+1} = -1/2, c_n = +1/2
    let mut f_acc = v.map(ChModel::f);
    f_acc.axpy(-1.0, &v_be.map(ChModel::f));
    f_acc.scale(0.5);
    let mut v_acc = v.clone();
    v_acc.sub(&v_be);
    v_acc.scale(0.5);

    let mut precomp = op.inv_all(v);
    let mut lap_part = op.lap_channel(&f_acc);
    lap_part.scale(dt);
    precomp.add(&lap_part);
    let mut bilap_part = op.bilap_channel(&v_acc);
    bilap_part.scale(-eps * eps * dt);
    precomp.add(&bilap_part);

    let (v_sdc, k) =
        solve_implicit(op, &precomp, dt, |xk| xk.map(ChModel::f_tilde), v.clone(), cfg)?;
    its += k;
    Ok((v_sdc, v_be, its))
}
