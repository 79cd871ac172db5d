//! Uniform periodic grids and the fields living on them.
//!
//! A 1D grid partitions `[a, b]` into `n` cells with nodes
//! `x_j = a + j*h`, `h = (b-a)/n`. The grid is periodic: `x_n ≡ x_0`, and
//! storage holds the `n` distinct unknowns `x_0 .. x_{n-1}` so that norms
//! and means never double-count the identified endpoint.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("domain is empty or reversed: a = {a}, b = {b}")]
    EmptyDomain { a: f64, b: f64 },
    #[error("cell count {n} too small (need n >= 4)")]
    TooFewCells { n: usize },
    #[error("non-finite domain bound")]
    NonFinite,
}

/// Uniform periodic 1D grid on `[a, b]` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GridError::NonFinite);
        }
        if b <= a {
            return Err(GridError::EmptyDomain { a, b });
        }
        if n < 4 {
            return Err(GridError::TooFewCells { n });
        }
        Ok(Self { a, b, n, h: (b - a) / n as f64 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of stored unknowns (the periodic image `x_n` is not stored).
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, j: usize) -> f64 {
        self.a + self.h * j as f64
    }

    /// Index of the stored node nearest to `x` (periodic wrap).
    pub fn nearest_node(&self, x: f64) -> usize {
        let j = ((x - self.a) / self.h).round() as i64;
        j.rem_euclid(self.n as i64) as usize
    }
}

/// Tensor-product 2D grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    gx: Grid1D,
    gy: Grid1D,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    /// Square grid on `[a, b]²` with `n` cells per axis.
    pub fn square(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        let g = Grid1D::new(a, b, n)?;
        Ok(Self { gx: g, gy: g })
    }

    pub fn gx(&self) -> &Grid1D {
        &self.gx
    }

    pub fn gy(&self) -> &Grid1D {
        &self.gy
    }

    pub fn nx(&self) -> usize {
        self.gx.n
    }

    pub fn ny(&self) -> usize {
        self.gy.n
    }

    pub fn len(&self) -> usize {
        self.gx.n * self.gy.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Scalar field on a periodic 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field1D {
    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match grid");
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
}

/// Scalar field on a periodic 2D grid, row-major with x contiguous:
/// `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let y = grid.gy.x(iy);
            for ix in 0..nx {
                values.push(f(grid.gx.x(ix), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.nx() + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let nx = self.grid.nx();
        self.values[iy * nx + ix] = v;
    }

    /// Transposed copy (x and y swapped). Used by line solvers and tests.
    pub fn transposed(&self) -> Field2D {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let tgrid = Grid2D::new(self.grid.gy, self.grid.gx);
        let mut t = Field2D::zeros(tgrid);
        for iy in 0..ny {
            for ix in 0..nx {
                t.values[ix * ny + iy] = self.values[iy * nx + ix];
            }
        }
        t
    }
}

/// Shared value-level operations; steppers are generic over this.
pub trait SolverField: Clone + Send + Sync {
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];
    fn zeros_like(&self) -> Self;

    fn fill(&mut self, c: f64) {
        self.values_mut().fill(c);
    }

    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.values_mut().iter_mut().zip(x.values()) {
            *s += a * v;
        }
    }

    fn add(&mut self, x: &Self) {
        self.axpy(1.0, x);
    }

    fn sub(&mut self, x: &Self) {
        self.axpy(-1.0, x);
    }

    fn scale(&mut self, a: f64) {
        for s in self.values_mut() {
            *s *= a;
        }
    }

    /// Pointwise map of one field into a fresh one.
    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for v in out.values_mut() {
            *v = f(*v);
        }
        out
    }

    fn max_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    fn diff_max_norm(&self, other: &Self) -> f64 {
        self.values()
            .iter()
            .zip(other.values())
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    fn mean(&self) -> f64 {
        let n = self.values().len();
        self.values().iter().sum::<f64>() / n as f64
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

impl SolverField for Field1D {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn zeros_like(&self) -> Self {
        Field1D::zeros(self.grid)
    }
}

impl SolverField for Field2D {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn zeros_like(&self) -> Self {
        Field2D::zeros(self.grid)
    }
}

/// Maximum norm `max_j |f_j|` over the stored periodic unknowns.
pub fn max_norm<F: SolverField>(f: &F) -> f64 {
    f.max_norm()
}

/// Arithmetic mean over the stored periodic unknowns.
pub fn mean<F: SolverField>(f: &F) -> f64 {
    f.mean()
}

/// Pointwise `((f_{j+1} - f_{j-1}) / 2h)²` with periodic wrap.
pub fn centered_gradient_sq_1d(f: &Field1D) -> Field1D {
    let n = f.grid.len();
    let inv2h = 1.0 / (2.0 * f.grid.h());
    let v = &f.values;
    let mut out = Field1D::zeros(f.grid);
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let g = (v[jp] - v[jm]) * inv2h;
        out.values[j] = g * g;
    }
    out
}

/// Sum of squared centered-difference gradients over both axes.
pub fn centered_gradient_sq_2d(f: &Field2D) -> Field2D {
    let (nx, ny) = (f.grid.nx(), f.grid.ny());
    let inv2hx = 1.0 / (2.0 * f.grid.gx.h());
    let inv2hy = 1.0 / (2.0 * f.grid.gy.h());
    let v = &f.values;
    let mut out = Field2D::zeros(f.grid);
    for iy in 0..ny {
        let yp = if iy + 1 == ny { 0 } else { iy + 1 };
        let ym = if iy == 0 { ny - 1 } else { iy - 1 };
        for ix in 0..nx {
            let xp = if ix + 1 == nx { 0 } else { ix + 1 };
            let xm = if ix == 0 { nx - 1 } else { ix - 1 };
            let gx = (v[iy * nx + xp] - v[iy * nx + xm]) * inv2hx;
            let gy = (v[yp * nx + ix] - v[ym * nx + ix]) * inv2hy;
            out.values[iy * nx + ix] = gx * gx + gy * gy;
        }
    }
    out
}
