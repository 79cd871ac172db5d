//! Matrix-free solvers for fourth- and sixth-order phase-field gradient flows.
//!
//! The library implements the Method-of-Lines-Transpose (MOL^T) approach:
//! the PDE is discretized in time first, and the resulting implicit spatial
//! operators are inverted analytically as products of modified Helmholtz
//! operators `L = I - Δ/α²`. Each 1D Helmholtz inverse is applied in O(N)
//! by Green's-function fast convolution with exponential recursion sweeps;
//! 2D operators are split line-by-line (ADI style) with the splitting error
//! folded back into the nonlinear fixed-point iteration, so the converged
//! iterate solves the unsplit equation.
//!
//! Modules:
//! - [`grid`]: uniform periodic grids, fields, norms and diagnostics
//! - [`helmholtz`]: 1D fast convolution and the modified Helmholtz inverse
//! - [`factorization`]: quartic/sextic implicit operators as Helmholtz products
//! - [`models`]: Cahn-Hilliard, vector Cahn-Hilliard and sixth-order models
//! - [`split2d`]: line-by-line 2D operators and splitting-error corrections
//! - [`steppers`]: BE/BDF/SDIRK/SDC time integrators
//! - [`adaptive`]: local-truncation-error driven step-size control
//! - [`drivers`]: coupled vector CH and sixth-order stepping assemblies

pub mod adaptive;
pub mod drivers;
pub mod factorization;
pub mod grid;
pub mod helmholtz;
pub mod models;
pub mod split2d;
pub mod steppers;
pub mod testing;

pub use grid::{Field1D, Field2D, Grid1D, Grid2D};
