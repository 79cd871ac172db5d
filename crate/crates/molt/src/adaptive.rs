//! Adaptive time-step control driven by local-truncation-error estimates.
//!
//! Each attempted step produces an LTE estimate η: either Richardson
//! step-doubling around the committed backward Euler solve
//! (`η = ½‖u_Δt - u_{Δt/2,Δt/2}‖∞`) or the gap to a higher-order predictor
//! (BDF2 or SDC2) advanced from the same history. The step-size update is:
//!
//! - `η ≤ σ_tol` and `N_it/N_maxit < 0.7`: accept, `Δt ← Δt·min(θ√(σ_tol/η), γ)`
//! - `η ≤ σ_tol` and `0.7 ≤ N_it/N_maxit < 1`: accept, `Δt ← Δt·min(θ√(σ_tol/η), 1)`
//! - `N_it/N_maxit ≥ 1`: reject, `Δt ← Δt/γ`
//! - `η > 2σ_tol`: reject, `Δt ← Δt/γ`
//! - `σ_tol < η ≤ 2σ_tol`: reject, `Δt ← Δt·θ√(σ_tol/η)`
//!
//! with safety factor θ = 0.8 and growth factor γ = 1.3. Rejected steps
//! never advance time or committed state. The backward Euler solution is
//! what gets committed; the predictor exists only to estimate the error.

use crate::factorization::{ImplicitOperator, QuarticPlan};
use crate::grid::SolverField;
use crate::models::ChModel;
use crate::steppers::{
    bdf2_variable_step, ch_whole_step, sdc2_predictor_step, Factory1D, Factory2D, IterationCfg,
    QuarticFactory, StepError,
};
use crate::{Field1D, Field2D};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("time step underflow (Δt = {dt:.3e} at t = {t:.6}) — controller cannot proceed")]
    StepUnderflow { dt: f64, t: f64 },
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LteEstimator {
    Richardson,
    Bdf2Predictor,
    Sdc2Predictor,
}

impl LteEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            LteEstimator::Richardson => "richardson",
            LteEstimator::Bdf2Predictor => "be-bdf2",
            LteEstimator::Sdc2Predictor => "be-sdc2",
        }
    }
}

/// Adaptive-step state: current Δt, tolerances, safety factors, statistics.
#[derive(Debug, Clone)]
pub struct StepController {
    pub dt: f64,
    pub sigma_tol: f64,
    pub theta: f64,
    pub gamma: f64,
    pub n_max_it: usize,
    pub estimator: LteEstimator,
    pub accepts: usize,
    pub rejects: usize,
}

impl StepController {
    pub fn new(dt0: f64, sigma_tol: f64, n_max_it: usize, estimator: LteEstimator) -> Self {
        assert!(dt0 > 0.0 && sigma_tol > 0.0);
        Self { dt: dt0, sigma_tol, theta: 0.8, gamma: 1.3, n_max_it, estimator, accepts: 0, rejects: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDecision {
    Accept { next_dt: f64 },
    Reject { retry_dt: f64 },
}

/// Pure step-size selection rule; `eta` is the LTE estimate of the attempted
/// step and `n_it` its fixed-point sweep count.
pub fn control_step(ctrl: &StepController, eta: f64, n_it: usize) -> StepDecision {
    let dt = ctrl.dt;
    let (theta, gamma) = (ctrl.theta, ctrl.gamma);
    let ratio = n_it as f64 / ctrl.n_max_it as f64;
    if eta <= ctrl.sigma_tol {
        // error target met: growth limited by the safety formula, the
        // growth cap, and the iteration headroom
        let shrink_grow = if eta == 0.0 {
            f64::INFINITY
        } else {
            theta * (ctrl.sigma_tol / eta).sqrt()
        };
        if ratio < 0.7 {
            StepDecision::Accept { next_dt: dt * shrink_grow.min(gamma) }
        } else if ratio < 1.0 {
            StepDecision::Accept { next_dt: dt * shrink_grow.min(1.0) }
        } else {
            StepDecision::Reject { retry_dt: dt / gamma }
        }
    } else if eta / ctrl.sigma_tol > 2.0 {
        StepDecision::Reject { retry_dt: dt / gamma }
    } else {
        StepDecision::Reject { retry_dt: dt * theta * (ctrl.sigma_tol / eta).sqrt() }
    }
}

/// Sign-flip detector at a fixed probe node. Reports the first accepted-step
/// time at which the physical order parameter turns negative, without
/// temporal interpolation.
#[derive(Debug, Clone)]
pub struct RipeningMonitor {
    pub ripening_time: Option<f64>,
}

impl RipeningMonitor {
    /// `initial_probe` is the physical `u` at the probe before stepping;
    /// the benchmarks all start positive there.
    pub fn new(initial_probe: f64) -> Self {
        assert!(initial_probe > 0.0, "ripening probe must start positive");
        Self { ripening_time: None }
    }

    pub fn observe(&mut self, u_probe: f64, t: f64) -> Option<f64> {
        if self.ripening_time.is_none() && u_probe < 0.0 {
            self.ripening_time = Some(t);
        }
        self.ripening_time
    }
}

/// What the adaptive loop needs from a concrete model/dimension pair.
/// Backward Euler is the committed solve; the two predictors provide LTE
/// references. All solves build their operator plans for the Δt they are
/// handed (plans are Δt-dependent).
pub trait AdaptiveProblem {
    type State: Clone;

    fn be_step(
        &self,
        v: &Self::State,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Self::State, usize), StepError>;

    fn bdf2_predictor(
        &self,
        v: &Self::State,
        v_prev: &Self::State,
        dt_prev: f64,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Self::State, usize), StepError>;

    /// SDC2 value over `dt`; `v_be` is the already-computed BE solution so
    /// the level-0 solve is not repeated.
    fn sdc2_predictor(
        &self,
        v: &Self::State,
        v_be: &Self::State,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Self::State, usize), StepError>;

    fn diff_max_norm(a: &Self::State, b: &Self::State) -> f64;

    /// Physical order parameter at the ripening probe node.
    fn probe(&self, v: &Self::State) -> f64;

    fn energy(&self, v: &Self::State) -> f64;

    /// Component means (one entry per field component), for volume tracking.
    fn means(&self, v: &Self::State) -> Vec<f64>;
}

/// Per-accepted-step trajectory record.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub n_it: usize,
    pub eta: f64,
    pub energy: f64,
    pub probe: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveReport {
    pub records: Vec<StepRecord>,
    pub accepts: usize,
    pub rejects: usize,
    pub ripening_time: Option<f64>,
    pub final_time: f64,
    pub final_means: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveRunCfg {
    pub sigma_tol: f64,
    pub dt0: f64,
    pub t_final: f64,
    pub stop_on_ripening: bool,
    pub estimator: LteEstimator,
    pub n_tol: f64,
    pub n_max_it: usize,
}

const DT_FLOOR: f64 = 1e-12;

/// Run the adaptive loop: estimate, decide, and commit the BE solution on
/// acceptance. Rejections retry the same step with the reduced Δt.
pub fn run_adaptive<P: AdaptiveProblem>(
    problem: &P,
    v0: P::State,
    run: &AdaptiveRunCfg,
) -> Result<(AdaptiveReport, P::State), AdaptiveError> {
    let cfg = IterationCfg::new(run.n_tol, run.n_max_it);
    let mut ctrl = StepController::new(run.dt0, run.sigma_tol, run.n_max_it, run.estimator);
    let mut monitor = RipeningMonitor::new(problem.probe(&v0));
    let mut v = v0;
    let mut t = 0.0;
    let mut shadow: Option<(P::State, f64)> = None;
    let mut records = Vec::new();

    while t < run.t_final {
        if ctrl.dt < DT_FLOOR {
            return Err(AdaptiveError::StepUnderflow { dt: ctrl.dt, t });
        }
        let dt = ctrl.dt.min(run.t_final - t).max(DT_FLOOR);

        // the committed candidate plus its error estimate; any inner
        // non-convergence counts as a rejection with Δt/γ
        let attempt = || -> Result<(P::State, usize, f64), StepError> {
            let (v_be, n_it) = problem.be_step(&v, dt, &cfg)?;
            let eta = match ctrl.estimator {
                LteEstimator::Richardson => {
                    let (vh, _) = problem.be_step(&v, 0.5 * dt, &cfg)?;
                    let (vhh, _) = problem.be_step(&vh, 0.5 * dt, &cfg)?;
                    0.5 * P::diff_max_norm(&v_be, &vhh)
                }
                LteEstimator::Bdf2Predictor => match &shadow {
                    Some((v_prev, dt_prev)) => {
                        let (v_ho, _) = problem.bdf2_predictor(&v, v_prev, *dt_prev, dt, &cfg)?;
                        P::diff_max_norm(&v_be, &v_ho)
                    }
                    None => {
                        // no history yet: fall back to step doubling
                        let (vh, _) = problem.be_step(&v, 0.5 * dt, &cfg)?;
                        let (vhh, _) = problem.be_step(&vh, 0.5 * dt, &cfg)?;
                        0.5 * P::diff_max_norm(&v_be, &vhh)
                    }
                },
                LteEstimator::Sdc2Predictor => {
                    let (v_ho, _) = problem.sdc2_predictor(&v, &v_be, dt, &cfg)?;
                    P::diff_max_norm(&v_be, &v_ho)
                }
            };
            Ok((v_be, n_it, eta))
        };

        let old_dt = ctrl.dt;
        ctrl.dt = dt;
        match attempt() {
            Err(_) => {
                ctrl.rejects += 1;
                ctrl.dt = old_dt.min(dt) / ctrl.gamma;
            }
            Ok((v_be, n_it, eta)) => match control_step(&ctrl, eta, n_it) {
                StepDecision::Reject { retry_dt } => {
                    ctrl.rejects += 1;
                    ctrl.dt = retry_dt;
                }
                StepDecision::Accept { next_dt } => {
                    ctrl.accepts += 1;
                    shadow = Some((v.clone(), dt));
                    v = v_be;
                    t += dt;
                    let probe = problem.probe(&v);
                    records.push(StepRecord {
                        t,
                        dt,
                        n_it,
                        eta,
                        energy: problem.energy(&v),
                        probe,
                    });
                    monitor.observe(probe, t);
                    if run.stop_on_ripening && monitor.ripening_time.is_some() {
                        break;
                    }
                    ctrl.dt = next_dt;
                }
            },
        }
    }

    let report = AdaptiveReport {
        records,
        accepts: ctrl.accepts,
        rejects: ctrl.rejects,
        ripening_time: monitor.ripening_time,
        final_time: t,
        final_means: problem.means(&v),
    };
    Ok((report, v))
}

/// Scalar CH in 1D; probe at x = π.
pub struct ChProblem1D {
    pub factory: Factory1D,
    pub model: ChModel,
    pub probe_node: usize,
}

impl ChProblem1D {
    pub fn new(factory: Factory1D, model: ChModel) -> Self {
        let probe_node = factory.grid.nearest_node(PI);
        Self { factory, model, probe_node }
    }
}

impl AdaptiveProblem for ChProblem1D {
    type State = Field1D;

    fn be_step(&self, v: &Field1D, dt: f64, cfg: &IterationCfg) -> Result<(Field1D, usize), StepError> {
        let op = self.factory.build(QuarticPlan::backward_euler(dt, self.model.eps)?)?;
        ch_whole_step(&op, v, dt, v.clone(), cfg)
    }

    fn bdf2_predictor(
        &self,
        v: &Field1D,
        v_prev: &Field1D,
        dt_prev: f64,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Field1D, usize), StepError> {
        bdf2_variable_step(&self.factory, self.model, v, v_prev, dt_prev, dt, cfg)
    }

    fn sdc2_predictor(
        &self,
        v: &Field1D,
        v_be: &Field1D,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Field1D, usize), StepError> {
        let op = self.factory.build(QuarticPlan::backward_euler(dt, self.model.eps)?)?;
        let (v_sdc, _, its) = sdc2_predictor_step(&op, self.model.eps, v, Some(v_be), dt, cfg)?;
        Ok((v_sdc, its))
    }

    fn diff_max_norm(a: &Field1D, b: &Field1D) -> f64 {
        a.diff_max_norm(b)
    }

    fn probe(&self, v: &Field1D) -> f64 {
        v.values()[self.probe_node] - 1.0
    }

    fn energy(&self, v: &Field1D) -> f64 {
        self.model.energy_1d(v)
    }

    fn means(&self, v: &Field1D) -> Vec<f64> {
        vec![v.mean()]
    }
}

/// Scalar CH in 2D; probe at (π/2, π/2).
pub struct ChProblem2D {
    pub factory: Factory2D,
    pub model: ChModel,
    pub probe_ix: usize,
    pub probe_iy: usize,
}

impl ChProblem2D {
    pub fn new(factory: Factory2D, model: ChModel) -> Self {
        let probe_ix = factory.grid.gx().nearest_node(PI / 2.0);
        let probe_iy = factory.grid.gy().nearest_node(PI / 2.0);
        Self { factory, model, probe_ix, probe_iy }
    }
}

impl AdaptiveProblem for ChProblem2D {
    type State = Field2D;

    fn be_step(&self, v: &Field2D, dt: f64, cfg: &IterationCfg) -> Result<(Field2D, usize), StepError> {
        let op = self.factory.build(QuarticPlan::backward_euler(dt, self.model.eps)?)?;
        ch_whole_step(&op, v, dt, v.clone(), cfg)
    }

    fn bdf2_predictor(
        &self,
        v: &Field2D,
        v_prev: &Field2D,
        dt_prev: f64,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Field2D, usize), StepError> {
        bdf2_variable_step(&self.factory, self.model, v, v_prev, dt_prev, dt, cfg)
    }

    fn sdc2_predictor(
        &self,
        v: &Field2D,
        v_be: &Field2D,
        dt: f64,
        cfg: &IterationCfg,
    ) -> Result<(Field2D, usize), StepError> {
        let op = self.factory.build(QuarticPlan::backward_euler(dt, self.model.eps)?)?;
        let (v_sdc, _, its) = sdc2_predictor_step(&op, self.model.eps, v, Some(v_be), dt, cfg)?;
        Ok((v_sdc, its))
    }

    fn diff_max_norm(a: &Field2D, b: &Field2D) -> f64 {
        a.diff_max_norm(b)
    }

    fn probe(&self, v: &Field2D) -> f64 {
        v.at(self.probe_ix, self.probe_iy) - 1.0
    }

    fn energy(&self, v: &Field2D) -> f64 {
        self.model.energy_2d(v)
    }

    fn means(&self, v: &Field2D) -> Vec<f64> {
        vec![v.mean()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    fn ctrl(sigma: f64) -> StepController {
        StepController::new(1.0, sigma, 600, LteEstimator::Bdf2Predictor)
    }

    #[test]
    fn control_growth_is_capped_by_gamma() {
        // η = σ/4 → θ√(σ/η) = 0.8·2 = 1.6 > γ: factor is γ = 1.3
        let c = ctrl(1e-4);
        match control_step(&c, 2.5e-5, 10) {
            StepDecision::Accept { next_dt } => assert!((next_dt - 1.3).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_rejects_large_eta_with_gamma_shrink() {
        // η = 4σ → reject at Δt/γ
        let c = ctrl(1e-4);
        match control_step(&c, 4.0e-4, 10) {
            StepDecision::Reject { retry_dt } => assert!((retry_dt - 1.0 / 1.3).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_rejects_mild_eta_with_sqrt_shrink() {
        // η = 1.5σ → reject at 0.8·√(1/1.5)·Δt ≈ 0.6532·Δt
        let c = ctrl(1e-4);
        match control_step(&c, 1.5e-4, 10) {
            StepDecision::Reject { retry_dt } => {
                let expect = 0.8 * (1.0_f64 / 1.5).sqrt();
                assert!((retry_dt - expect).abs() < 1e-12, "{retry_dt}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_iteration_headroom_branches() {
        let c = ctrl(1e-4);
        // 0.7 ≤ ratio < 1: accepted but growth clamped at 1
        match control_step(&c, 1e-6, 450) {
            StepDecision::Accept { next_dt } => assert!((next_dt - 1.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        // ratio ≥ 1: reject at Δt/γ even though η was fine
        match control_step(&c, 1e-6, 600) {
            StepDecision::Reject { retry_dt } => assert!((retry_dt - 1.0 / 1.3).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn control_zero_eta_takes_growth_cap() {
        let c = ctrl(1e-4);
        match control_step(&c, 0.0, 1) {
            StepDecision::Accept { next_dt } => assert!((next_dt - 1.3).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn controller_is_deterministic() {
        let c = ctrl(1e-5);
        let seq = [(3e-6, 12), (8e-6, 40), (2e-5, 55), (0.0, 3)];
        let a: Vec<StepDecision> = seq.iter().map(|&(e, n)| control_step(&c, e, n)).collect();
        let b: Vec<StepDecision> = seq.iter().map(|&(e, n)| control_step(&c, e, n)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn ripening_monitor_flags_first_sign_flip() {
        let mut m = RipeningMonitor::new(0.8);
        assert!(m.observe(0.5, 1.0).is_none());
        assert!(m.observe(0.1, 2.0).is_none());
        assert_eq!(m.observe(-0.2, 3.0), Some(3.0));
        // later observations do not overwrite
        assert_eq!(m.observe(-0.9, 4.0), Some(3.0));
        assert_eq!(m.observe(0.9, 5.0), Some(3.0));
    }

    #[test]
    fn equilibrium_run_grows_dt_by_gamma() {
        // η = 0 at an exact equilibrium: Δt must grow by γ each accepted step
        let grid = Grid1D::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let problem = ChProblem1D::new(Factory1D { grid, m: 4 }, ChModel::new(0.18));
        let v0 = Field1D::constant(grid, 2.0);
        let run = AdaptiveRunCfg {
            sigma_tol: 1e-5,
            dt0: 1e-3,
            t_final: 0.1,
            stop_on_ripening: false,
            estimator: LteEstimator::Sdc2Predictor,
            n_tol: 1e-12,
            n_max_it: 600,
        };
        let (report, _) = run_adaptive(&problem, v0, &run).unwrap();
        assert_eq!(report.rejects, 0);
        for pair in report.records.windows(2) {
            let ratio = pair[1].dt / pair[0].dt;
            // growth bound: Δt^{n+1}/Δtⁿ ≤ γ, and at equilibrium it attains
            // γ except for the final clamped step
            assert!(ratio <= 1.3 + 1e-12, "ratio {ratio}");
        }
        let growth: Vec<f64> =
            report.records.windows(2).map(|p| p[1].dt / p[0].dt).collect();
        assert!(growth.iter().take(growth.len().saturating_sub(1)).all(|&r| (r - 1.3).abs() < 1e-9));
    }

    #[test]
    fn accepted_steps_meet_the_lte_bound() {
        // small perturbation of an equilibrium, BE-BDF2 estimator
        let grid = Grid1D::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let problem = ChProblem1D::new(Factory1D { grid, m: 4 }, ChModel::new(0.18));
        let v0 = Field1D::from_fn(grid, |x| 1.0 + 0.4 * x.sin());
        let run = AdaptiveRunCfg {
            sigma_tol: 1e-5,
            dt0: 1e-3,
            t_final: 0.5,
            stop_on_ripening: false,
            estimator: LteEstimator::Bdf2Predictor,
            n_tol: 1e-11,
            n_max_it: 600,
        };
        let (report, _) = run_adaptive(&problem, v0, &run).unwrap();
        assert!(!report.records.is_empty());
        for r in &report.records {
            assert!(r.eta <= run.sigma_tol * (1.0 + 1e-12), "eta {} at t {}", r.eta, r.t);
        }
        // growth bound holds everywhere
        for pair in report.records.windows(2) {
            assert!(pair[1].dt <= pair[0].dt * 1.3 + 1e-12);
        }
    }
}
