//! Uniform tensor grids in one or two space dimensions, the time partition of
//! `[0, T]`, and the space-time field container shared by every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `Omega` is the flat torus of the given side length; nodes `x_i = i h`, `h = side / n`.
    Periodic,
    /// Closed box with nodes on both walls; `h = side / (n - 1)`. No-flux closure by
    /// ghost-point reflection.
    Neumann,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "neumann" => Ok(Boundary::Neumann),
            other => Err(Error::InvalidParameter(format!("unknown boundary kind `{other}`"))),
        }
    }
}

/// Spatial lattice. Node index is `i0 + n * i1`, axis 0 varies fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    side: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(dim: usize, n: usize, side: f64, boundary: Boundary) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 4 {
            return Err(Error::InvalidParameter(format!("need at least 4 points per axis, got {n}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidParameter(format!("side length must be positive, got {side}")));
        }
        Ok(Self { dim, n, side, boundary })
    }

    /// Unit box / unit torus.
    pub fn unit(dim: usize, n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(dim, n, 1.0, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn h(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.side / self.n as f64,
            Boundary::Neumann => self.side / (self.n - 1) as f64,
        }
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Per-axis indices of a node.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx % self.n, idx / self.n],
        }
    }

    pub fn flat_index(&self, ix: [usize; 2]) -> usize {
        match self.dim {
            1 => ix[0],
            _ => ix[0] + self.n * ix[1],
        }
    }

    /// Stride of `axis` in the flat index.
    pub(crate) fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.n
        }
    }

    /// Node coordinates; entries past `dim` are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        let ix = self.multi_index(idx);
        let mut x = [ix[0] as f64 * h, 0.0];
        if self.dim == 2 {
            x[1] = ix[1] as f64 * h;
        }
        x
    }

    /// One-dimensional quadrature weight of node `i` along an axis (without `h`).
    pub(crate) fn axis_weight(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => 1.0,
            Boundary::Neumann => {
                if i == 0 || i == self.n - 1 {
                    0.5
                } else {
                    1.0
                }
            }
        }
    }

    /// Quadrature weight of a node: `h^dim` times trapezoid factors on Neumann walls.
    pub fn weight(&self, idx: usize) -> f64 {
        let ix = self.multi_index(idx);
        let mut w = self.h().powi(self.dim as i32) * self.axis_weight(ix[0]);
        if self.dim == 2 {
            w *= self.axis_weight(ix[1]);
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub(crate) fn check_scalar(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: values.len() });
        }
        Ok(())
    }

    pub(crate) fn check_vector(&self, values: &[f64]) -> Result<()> {
        let expected = self.len() * self.dim;
        if values.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: values.len() });
        }
        Ok(())
    }

    /// Samples `f(x)` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.point(i);
                f(&x[..self.dim])
            })
            .collect()
    }
}

/// Uniform partition `t_k = k dt` of `[0, T]` with `K` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("need at least one time step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Trapezoid weight of time node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }
}

/// Samples over the lattice `{t_0..t_K} x grid`. Layout is `[k][component][node]`, so each
/// component at each time is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    time: TimeGrid,
    components: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid, time: TimeGrid, components: usize) -> Self {
        let len = (time.steps() + 1) * grid.len() * components;
        Self { grid, time, components, values: vec![0.0; len] }
    }

    pub fn scalar(grid: Grid, time: TimeGrid) -> Self {
        Self::zeros(grid, time, 1)
    }

    pub fn vector(grid: Grid, time: TimeGrid) -> Self {
        Self::zeros(grid, time, grid.dim())
    }

    pub fn from_values(grid: Grid, time: TimeGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        let expected = (time.steps() + 1) * grid.len() * components;
        if values.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("field contains non-finite value {bad}")));
        }
        Ok(Self { grid, time, components, values })
    }

    /// Field whose every time slice equals `slice`.
    pub fn constant_in_time(grid: Grid, time: TimeGrid, components: usize, slice: &[f64]) -> Result<Self> {
        let per = grid.len() * components;
        if slice.len() != per {
            return Err(Error::ShapeMismatch { expected: per, actual: slice.len() });
        }
        let mut values = Vec::with_capacity(per * (time.steps() + 1));
        for _ in 0..=time.steps() {
            values.extend_from_slice(slice);
        }
        Ok(Self { grid, time, components, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn slice_len(&self) -> usize {
        self.grid.len() * self.components
    }

    /// All components at time index `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        let s = self.slice_len();
        &self.values[k * s..(k + 1) * s]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.slice_len();
        &mut self.values[k * s..(k + 1) * s]
    }

    pub fn set(&mut self, k: usize, slice: &[f64]) {
        self.at_mut(k).copy_from_slice(slice);
    }

    pub fn same_lattice(&self, other: &SpaceTimeField) -> bool {
        self.grid == other.grid && self.time == other.time
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `max |self - other|` over the lattice.
    pub fn sup_distance(&self, other: &SpaceTimeField) -> Result<f64> {
        if !self.same_lattice(other) || self.components != other.components {
            return Err(Error::GridMismatch("fields live on different lattices".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
