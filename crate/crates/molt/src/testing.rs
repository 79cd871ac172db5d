//! Test-support oracles, kept independent of the O(N) implementation paths.
//!
//! The dense convolution below shares only the per-cell quadrature weights
//! with the fast solver; the global summation uses direct `exp` evaluation
//! of the kernel decay instead of the exponential recursion, and the
//! periodic closure is assembled from the densely summed endpoint values.
//! Intended for tests and the acceptance suite — not a production path.

use crate::grid::{Field1D, SolverField};
use crate::helmholtz::HelmholtzPlan;

/// O(N²) dense evaluation of the Green's-function convolution `I[v]` using
/// the same local quadrature as the plan but direct kernel summation.
pub fn dense_convolve(v: &Field1D, plan: &HelmholtzPlan) -> Field1D {
    let n = v.grid().len();
    let nu = plan.nu();
    let half = (plan.order() / 2) as i64;
    let wl = plan.weights_left();
    let wr = plan.weights_right();
    let vals = v.values();
    let wrap = |j: i64| -> f64 { vals[j.rem_euclid(n as i64) as usize] };

    // per-cell local integrals
    let jl: Vec<f64> = (1..=n)
        .map(|j| {
            wl.iter()
                .enumerate()
                .map(|(i, &w)| w * wrap(j as i64 + i as i64 - half))
                .sum()
        })
        .collect();
    let jr: Vec<f64> = (0..n)
        .map(|j| {
            wr.iter()
                .enumerate()
                .map(|(i, &w)| w * wrap(j as i64 + i as i64 - half))
                .sum()
        })
        .collect();

    let mut out = Field1D::zeros(*v.grid());
    for j in 0..n {
        let mut il = 0.0;
        for (m, &jlm) in jl.iter().enumerate().take(j) {
            // cell index m+1 contributes decay e^{-ν(j-(m+1))}
            il += (-nu * (j as f64 - (m + 1) as f64)).exp() * jlm;
        }
        let mut ir = 0.0;
        for (m, &jrm) in jr.iter().enumerate().skip(j) {
            ir += (-nu * (m as f64 - j as f64)).exp() * jrm;
        }
        out.values_mut()[j] = 0.5 * (il + ir);
    }
    out
}

/// O(N²) dense evaluation of `L⁻¹v` with periodic closure.
pub fn dense_linv_periodic(v: &Field1D, plan: &HelmholtzPlan) -> Field1D {
    let n = v.grid().len();
    let nu = plan.nu();
    let half = (plan.order() / 2) as i64;
    let wl = plan.weights_left();
    let wr = plan.weights_right();
    let vals = v.values();
    let wrap = |j: i64| -> f64 { vals[j.rem_euclid(n as i64) as usize] };

    let jl: Vec<f64> = (1..=n)
        .map(|j| {
            wl.iter()
                .enumerate()
                .map(|(i, &w)| w * wrap(j as i64 + i as i64 - half))
                .sum()
        })
        .collect();
    let jr: Vec<f64> = (0..n)
        .map(|j| {
            wr.iter()
                .enumerate()
                .map(|(i, &w)| w * wrap(j as i64 + i as i64 - half))
                .sum()
        })
        .collect();

    let il_at = |j: usize| -> f64 {
        (0..j).map(|m| (-nu * (j as f64 - (m + 1) as f64)).exp() * jl[m]).sum()
    };
    let ir_at = |j: usize| -> f64 {
        (j..n).map(|m| (-nu * (m as f64 - j as f64)).exp() * jr[m]).sum()
    };
    let i_at = |j: usize| -> f64 {
        if j == n {
            // right endpoint: I^R_n = 0
            0.5 * (0..n).map(|m| (-nu * (n - 1 - m) as f64).exp() * jl[m]).sum::<f64>()
        } else {
            0.5 * (il_at(j) + ir_at(j))
        }
    };

    let mu = (-nu * n as f64).exp();
    let ba = i_at(n) / (1.0 - mu);
    let bb = i_at(0) / (1.0 - mu);
    let mut out = Field1D::zeros(*v.grid());
    for j in 0..n {
        out.values_mut()[j] = i_at(j)
            + ba * (-nu * j as f64).exp()
            + bb * (-nu * (n - j) as f64).exp();
    }
    out
}

/// Measured eigenvalue of the discrete periodic `L⁻¹` on the mode
/// `cos(k·2π(x-a)/(b-a))`. Panics if the response is not proportional to
/// the input mode (it always is for a symmetric circulant).
pub fn measure_symbol(plan: &HelmholtzPlan, k: usize) -> f64 {
    let grid = *plan.grid();
    let scale = 2.0 * std::f64::consts::PI / (grid.b() - grid.a());
    let mode = Field1D::from_fn(grid, |x| (k as f64 * scale * (x - grid.a())).cos());
    let out = crate::helmholtz::apply_linv_periodic(&mode, plan);
    let num: f64 = out.values().iter().zip(mode.values()).map(|(a, b)| a * b).sum();
    let den: f64 = mode.values().iter().map(|b| b * b).sum();
    let sigma = num / den;
    // response must be the same mode up to roundoff-scale residue
    let mut residual = 0.0_f64;
    for (o, m) in out.values().iter().zip(mode.values()) {
        residual = residual.max((o - sigma * m).abs());
    }
    assert!(
        residual < 1e-9 * sigma.abs().max(1.0),
        "mode {k} response is not an eigenvector (residual {residual})"
    );
    sigma
}
