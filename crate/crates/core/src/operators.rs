//! Discrete calculus on a [`Grid`].
//!
//! * `laplacian`: compact second-order stencil, ghost reflection on Neumann walls.
//! * `gradient`: centered differences; zero normal derivative on Neumann walls.
//! * `divergence_adjoint`: the exact negative adjoint of `gradient` in the quadrature
//!   inner product, so `<grad phi, v> + <phi, div v> = 0` holds to rounding.
//!
//! Vector slices use the layout `[component][node]`.

use crate::error::Result;
use crate::grid::{Boundary, Grid};
use crate::linalg::{CsrMatrix, TripletBuilder};

#[derive(Clone, Copy)]
struct Stencil {
    entries: [(usize, f64); 3],
    len: usize,
}

impl Stencil {
    fn new() -> Self {
        Self { entries: [(0, 0.0); 3], len: 0 }
    }

    fn push(&mut self, j: usize, c: f64) {
        self.entries[self.len] = (j, c);
        self.len += 1;
    }

    fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[..self.len].iter().copied()
    }
}

#[derive(Clone, Copy)]
enum AxisOp {
    Laplacian,
    Gradient,
    Divergence,
}

fn axis_stencil(grid: &Grid, op: AxisOp, i: usize) -> Stencil {
    let n = grid.n();
    let h = grid.h();
    let mut s = Stencil::new();
    match grid.boundary() {
        Boundary::Periodic => {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            match op {
                AxisOp::Laplacian => {
                    let c = 1.0 / (h * h);
                    s.push(prev, c);
                    s.push(i, -2.0 * c);
                    s.push(next, c);
                }
                AxisOp::Gradient | AxisOp::Divergence => {
                    let c = 0.5 / h;
                    s.push(prev, -c);
                    s.push(next, c);
                }
            }
        }
        Boundary::Neumann => {
            let interior = |j: usize| j >= 1 && j + 1 < n;
            match op {
                AxisOp::Laplacian => {
                    let c = 1.0 / (h * h);
                    if i == 0 {
                        s.push(0, -2.0 * c);
                        s.push(1, 2.0 * c);
                    } else if i == n - 1 {
                        s.push(n - 2, 2.0 * c);
                        s.push(n - 1, -2.0 * c);
                    } else {
                        s.push(i - 1, c);
                        s.push(i, -2.0 * c);
                        s.push(i + 1, c);
                    }
                }
                AxisOp::Gradient => {
                    if interior(i) {
                        s.push(i - 1, -0.5 / h);
                        s.push(i + 1, 0.5 / h);
                    }
                }
                AxisOp::Divergence => {
                    let c = 0.5 / (h * grid.axis_weight(i));
                    if i >= 1 && interior(i - 1) {
                        s.push(i - 1, -c);
                    }
                    if interior(i + 1) {
                        s.push(i + 1, c);
                    }
                }
            }
        }
    }
    s
}

/// Calls `visit(j, coef)` for every term of the axis stencil at node `idx`.
#[inline]
fn for_each_axis(grid: &Grid, op: AxisOp, axis: usize, idx: usize, mut visit: impl FnMut(usize, f64)) {
    let ix = grid.multi_index(idx);
    let i = ix[axis];
    let stride = grid.stride(axis);
    let base = idx - i * stride;
    for (j, c) in axis_stencil(grid, op, i).iter() {
        visit(base + j * stride, c);
    }
}

pub(crate) fn laplacian_into(grid: &Grid, field: &[f64], out: &mut [f64]) {
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            for_each_axis(grid, AxisOp::Laplacian, axis, idx, |j, c| acc += c * field[j]);
        }
        *o = acc;
    }
}

pub(crate) fn gradient_into(grid: &Grid, field: &[f64], out: &mut [f64]) {
    let len = grid.len();
    for axis in 0..grid.dim() {
        let comp = &mut out[axis * len..(axis + 1) * len];
        for (idx, o) in comp.iter_mut().enumerate() {
            let mut acc = 0.0;
            for_each_axis(grid, AxisOp::Gradient, axis, idx, |j, c| acc += c * field[j]);
            *o = acc;
        }
    }
}

pub(crate) fn divergence_into(grid: &Grid, vector: &[f64], out: &mut [f64]) {
    let len = grid.len();
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let comp = &vector[axis * len..(axis + 1) * len];
            for_each_axis(grid, AxisOp::Divergence, axis, idx, |j, c| acc += c * comp[j]);
        }
        *o = acc;
    }
}

pub fn laplacian(field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_scalar(field)?;
    let mut out = vec![0.0; grid.len()];
    laplacian_into(grid, field, &mut out);
    Ok(out)
}

pub fn gradient(field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_scalar(field)?;
    let mut out = vec![0.0; grid.len() * grid.dim()];
    gradient_into(grid, field, &mut out);
    Ok(out)
}

pub fn divergence_adjoint(vector: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_vector(vector)?;
    let mut out = vec![0.0; grid.len()];
    divergence_into(grid, vector, &mut out);
    Ok(out)
}

/// Quadrature `sum_i w_i f_i` (uniform weights on the torus, trapezoid on Neumann boxes).
pub fn integrate(field: &[f64], grid: &Grid) -> f64 {
    debug_assert_eq!(field.len(), grid.len());
    field.iter().enumerate().map(|(i, v)| grid.weight(i) * v).sum()
}

/// Weighted pairing of two scalar slices, or of two vector slices component by component.
pub fn inner(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let len = grid.len();
    a.iter().zip(b).enumerate().map(|(i, (x, y))| grid.weight(i % len) * x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    /// Lattice maximum.
    pub sup: f64,
    /// Lattice minimum.
    pub inf: f64,
    pub l1: f64,
    pub l2: f64,
}

pub fn norms(field: &[f64], grid: &Grid) -> Norms {
    let sup = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = field.iter().copied().fold(f64::INFINITY, f64::min);
    Norms { sup, inf, l1: lp_norm(field, grid, 1.0), l2: lp_norm(field, grid, 2.0) }
}

/// `(int |f|^p)^(1/p)` by the grid quadrature; `p = inf` gives the max modulus.
pub fn lp_norm(field: &[f64], grid: &Grid, p: f64) -> f64 {
    if p.is_infinite() {
        return field.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s: f64 = field.iter().enumerate().map(|(i, v)| grid.weight(i) * v.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

/// Pointwise Euclidean modulus of a vector slice.
pub fn pointwise_modulus(vector: &[f64], grid: &Grid) -> Vec<f64> {
    let len = grid.len();
    (0..len)
        .map(|i| (0..grid.dim()).map(|c| vector[c * len + i].powi(2)).sum::<f64>().sqrt())
        .collect()
}

/// Adds `scale * Laplacian` to `builder`.
pub(crate) fn add_laplacian(builder: &mut TripletBuilder, grid: &Grid, scale: f64) {
    for idx in 0..grid.len() {
        for axis in 0..grid.dim() {
            for_each_axis(grid, AxisOp::Laplacian, axis, idx, |j, c| builder.push(idx, j, scale * c));
        }
    }
}

/// Adds `scale * sum_a D_a diag(coef_a)`, i.e. the map `m -> scale * div(coef m)`.
pub(crate) fn add_divergence_of_product(builder: &mut TripletBuilder, grid: &Grid, scale: f64, coef: &[f64]) {
    let len = grid.len();
    for idx in 0..len {
        for axis in 0..grid.dim() {
            let comp = &coef[axis * len..(axis + 1) * len];
            for_each_axis(grid, AxisOp::Divergence, axis, idx, |j, c| builder.push(idx, j, scale * c * comp[j]));
        }
    }
}

/// Adds `scale * sum_a diag(coef_a) G_a`, i.e. the map `u -> scale * coef . grad u`.
pub(crate) fn add_transport(builder: &mut TripletBuilder, grid: &Grid, scale: f64, coef: &[f64]) {
    let len = grid.len();
    for idx in 0..len {
        for axis in 0..grid.dim() {
            let ci = coef[axis * len + idx];
            if ci != 0.0 {
                for_each_axis(grid, AxisOp::Gradient, axis, idx, |j, c| builder.push(idx, j, scale * ci * c));
            }
        }
    }
}

pub(crate) fn add_identity(builder: &mut TripletBuilder, n: usize, scale: f64) {
    for i in 0..n {
        builder.push(i, i, scale);
    }
}

/// `I - dt * Laplacian`.
pub fn diffusion_matrix(grid: &Grid, dt: f64) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(grid.len(), grid.len() * (1 + 3 * grid.dim()));
    add_identity(&mut b, grid.len(), 1.0);
    add_laplacian(&mut b, grid, -dt);
    b.build()
}

/// Assembled Laplacian; used by tests and by the dense oracle checks.
pub fn laplacian_matrix(grid: &Grid) -> CsrMatrix {
    let mut b = TripletBuilder::new(grid.len());
    add_laplacian(&mut b, grid, 1.0);
    b.build()
}
