//! Mean-field-type control: the objective `J(m, w)` over pairs satisfying the discrete
//! Fokker-Planck constraint, its adjoint and Gateaux derivative, the optimality system
//! solve, and the comparison with the game.
//!
//! Discrete constraint set `K_h`: `m_0 = m0` and, for `k = 0..K-1`,
//! `(m_{k+1} - m_k)/dt - Lap m_{k+1} + D w_{k+1} = 0`.
//! Discrete objective (right-endpoint rule in time):
//! `J = dt sum_{k=1..K} int [L~(t_k, m_k, w_k) + F(t_k, m_k)] + int G(m_K)`.
//! With the fully implicit scheme, the control system solved by [`mftc_solve`] is exactly
//! the first-order optimality system of this `J` on `K_h`, with `w = -m grad_p H(m, G u)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField, TimeGrid};
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{grid_ordering, BandLu};
use crate::mfg::{picard_driver, ConvergenceReport, MFGSolution, PicardOptions};
use crate::operators::{diffusion_matrix, divergence_into, gradient_into, inner, laplacian_into};
use crate::pde::{Scheme, SolverConfig, System};
use crate::problem::ProblemData;

/// A density and momentum on one lattice.
#[derive(Clone, Debug)]
pub struct ControlPair {
    pub m: SpaceTimeField,
    pub w: SpaceTimeField,
}

impl ControlPair {
    pub fn new(m: SpaceTimeField, w: SpaceTimeField) -> Result<Self> {
        if !m.same_lattice(&w) || m.components() != 1 || w.components() != m.grid().dim() {
            return Err(Error::GridMismatch("control pair needs a scalar m and a d-vector w on one lattice".into()));
        }
        Ok(Self { m, w })
    }

    /// `(m, -m b)` of a computed solution.
    pub fn from_solution(sol: &MFGSolution) -> Self {
        Self { m: sol.m.clone(), w: sol.momentum() }
    }

    pub fn grid(&self) -> &Grid {
        self.m.grid()
    }

    pub fn time(&self) -> &TimeGrid {
        self.m.time()
    }

    /// `self + theta * dir`.
    pub fn offset(&self, dir: &ControlPair, theta: f64) -> Result<Self> {
        if !self.m.same_lattice(&dir.m) {
            return Err(Error::GridMismatch("direction lives on another lattice".into()));
        }
        let shift = |a: &SpaceTimeField, b: &SpaceTimeField| {
            let v = a.values().iter().zip(b.values()).map(|(x, y)| x + theta * y).collect();
            SpaceTimeField::from_values(*a.grid(), *a.time(), a.components(), v)
        };
        Ok(Self { m: shift(&self.m, &dir.m)?, w: shift(&self.w, &dir.w)? })
    }

    pub fn scaled_sum(a: f64, x: &ControlPair, b: f64, y: &ControlPair) -> Result<Self> {
        let mix = |p: &SpaceTimeField, q: &SpaceTimeField| {
            let v = p.values().iter().zip(q.values()).map(|(s, t)| a * s + b * t).collect();
            SpaceTimeField::from_values(*p.grid(), *p.time(), p.components(), v)
        };
        Ok(Self { m: mix(&x.m, &y.m)?, w: mix(&x.w, &y.w)? })
    }
}

fn node_slice(w: &[f64], n: usize, d: usize, i: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    for a in 0..d {
        out[a] = w[a * n + i];
    }
    out
}

/// `J(m, w)`.
pub fn objective_j(pair: &ControlPair, spec: &HamiltonianSpec, data: &ProblemData) -> Result<f64> {
    let grid = *pair.grid();
    let time = *pair.time();
    let (n, d) = (grid.len(), grid.dim());
    let dt = time.dt();
    let mut total = 0.0;
    for k in 1..=time.steps() {
        let t = time.t(k);
        let (m, w) = (pair.m.at(k), pair.w.at(k));
        let mut slice = 0.0;
        for i in 0..n {
            let x = grid.point(i);
            let wi = node_slice(w, n, d, i);
            slice += grid.weight(i) * (spec.tilde_l(t, &x[..d], m[i], &wi[..d])? + data.f().primitive(t, &x[..d], m[i]));
        }
        total += dt * slice;
    }
    let m_final = pair.m.at(time.steps());
    for i in 0..n {
        let x = grid.point(i);
        total += grid.weight(i) * data.g().primitive(time.horizon(), &x[..d], m_final[i]);
    }
    Ok(total)
}

/// Sup norm of the discrete constraint residuals, with initial density `m_init`.
fn constraint_residual(pair: &ControlPair, m_init: &[f64]) -> f64 {
    let grid = *pair.grid();
    let time = *pair.time();
    let n = grid.len();
    let dt = time.dt();
    let mut worst = pair.m.at(0).iter().zip(m_init).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    let (mut lap, mut div) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..time.steps() {
        let (mk, mn) = (pair.m.at(k), pair.m.at(k + 1));
        laplacian_into(&grid, mn, &mut lap);
        divergence_into(&grid, pair.w.at(k + 1), &mut div);
        for i in 0..n {
            worst = worst.max(((mn[i] - mk[i]) / dt - lap[i] + div[i]).abs());
        }
    }
    worst
}

/// Sup-norm residual of `(m, w)` in the constraint set `K_h`.
pub fn feasibility_residual(pair: &ControlPair, data: &ProblemData) -> Result<f64> {
    if pair.grid() != data.grid() {
        return Err(Error::GridMismatch("pair and data live on different grids".into()));
    }
    Ok(constraint_residual(pair, data.m0()))
}

/// The density of `K_h` driven by `w`: `(I - dt Lap) m_{k+1} = m_k - dt D w_{k+1}`.
pub fn feasible_density(w: &SpaceTimeField, m_init: &[f64]) -> Result<SpaceTimeField> {
    let grid = *w.grid();
    let time = *w.time();
    let n = grid.len();
    let lu = BandLu::factor(&diffusion_matrix(&grid, time.dt()), Some(grid_ordering(&grid)))?;
    let mut m = SpaceTimeField::scalar(grid, time);
    m.set(0, m_init);
    let mut div = vec![0.0; n];
    for k in 0..time.steps() {
        divergence_into(&grid, w.at(k + 1), &mut div);
        let rhs: Vec<f64> = m.at(k).iter().zip(&div).map(|(a, b)| a - time.dt() * b).collect();
        m.set(k + 1, &lu.solve(&rhs));
    }
    Ok(m)
}

/// Backward solve of `(u_k - u_{k+1})/dt - Lap u_k = f(t_{k+1}, m_{k+1}) + d_m L~(m_{k+1}, w_{k+1})`,
/// `u_K = g(m_K)`.
pub fn adjoint_solve(pair: &ControlPair, spec: &HamiltonianSpec, data: &ProblemData) -> Result<SpaceTimeField> {
    let grid = *pair.grid();
    let time = *pair.time();
    let (n, d) = (grid.len(), grid.dim());
    let dt = time.dt();
    if let Some(bad) = pair.m.values().iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity(*bad));
    }
    let lu = BandLu::factor(&diffusion_matrix(&grid, dt), Some(grid_ordering(&grid)))?;
    let steps = time.steps();
    let mut u = SpaceTimeField::scalar(grid, time);
    let m_final = pair.m.at(steps);
    let terminal: Vec<f64> = (0..n).map(|i| data.g().eval(time.horizon(), &grid.point(i)[..d], m_final[i])).collect();
    u.set(steps, &terminal);
    for k in (0..steps).rev() {
        let t = time.t(k + 1);
        let (m, w) = (pair.m.at(k + 1), pair.w.at(k + 1));
        let mut rhs = u.at(k + 1).to_vec();
        for (i, r) in rhs.iter_mut().enumerate() {
            let x = grid.point(i);
            let wi = node_slice(w, n, d, i);
            *r += dt * (data.f().eval(t, &x[..d], m[i]) + spec.dm_tilde_l(t, &x[..d], m[i], &wi[..d])?);
        }
        u.set(k, &lu.solve(&rhs));
    }
    Ok(u)
}

/// A tangent direction `(m~, w~)` of `K_h`: `m~_0 = 0` and `m~` driven by `w~`.
pub fn tangent_direction(w: SpaceTimeField) -> Result<ControlPair> {
    let zero = vec![0.0; w.grid().len()];
    let m = feasible_density(&w, &zero)?;
    ControlPair::new(m, w)
}

/// Smooth random momentum field with sup norm at most `amplitude`.
pub fn random_momentum(grid: Grid, time: TimeGrid, amplitude: f64, seed: u64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let modes = 3;
    let coef: Vec<f64> = (0..d * modes * modes * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phase: Vec<f64> = (0..d * modes).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let mut w = SpaceTimeField::vector(grid, time);
    let scale = amplitude / (modes * modes * 2) as f64;
    for k in 0..=time.steps() {
        let tau = time.t(k) / time.horizon();
        let n = grid.len();
        let slice = w.at_mut(k);
        for a in 0..d {
            for i in 0..n {
                let x = grid.point(i);
                let mut v = 0.0;
                for j in 0..modes {
                    let arg = std::f64::consts::TAU * (j + 1) as f64 * x[a] / grid.side() + phase[a * modes + j];
                    for l in 0..modes {
                        let c = &coef[((a * modes + j) * modes + l) * 2..][..2];
                        let temporal = (std::f64::consts::PI * l as f64 * tau).cos();
                        v += temporal * (c[0] * arg.sin() + c[1] * arg.cos());
                    }
                }
                slice[a * n + i] = scale * v;
            }
        }
    }
    w
}

/// `dt sum_{k=0..K-1} <G u_k + grad_w L~(m_{k+1}, w_{k+1}), w~_{k+1}>` with `u` the adjoint
/// state of `pair`. The direction must be tangent to `K_h`.
pub fn gateaux_derivative(pair: &ControlPair, direction: &ControlPair, spec: &HamiltonianSpec, data: &ProblemData) -> Result<f64> {
    let u = adjoint_solve(pair, spec, data)?;
    gateaux_with_adjoint(pair, &u, direction, spec)
}

/// [`gateaux_derivative`] with a precomputed adjoint state.
pub fn gateaux_with_adjoint(pair: &ControlPair, u: &SpaceTimeField, direction: &ControlPair, spec: &HamiltonianSpec) -> Result<f64> {
    if !direction.m.same_lattice(&pair.m) {
        return Err(Error::GridMismatch("direction lives on another lattice".into()));
    }
    let grid = *pair.grid();
    let time = *pair.time();
    let (n, d) = (grid.len(), grid.dim());
    let res = constraint_residual(direction, &vec![0.0; n]);
    let scale = direction.m.sup_abs().max(direction.w.sup_abs()).max(1.0) / time.dt();
    if !(res <= 1e-10 * scale) {
        return Err(Error::InfeasibleDirection(res));
    }
    let mut p = vec![0.0; n * d];
    let mut total = 0.0;
    for k in 0..time.steps() {
        let t = time.t(k + 1);
        gradient_into(&grid, u.at(k), &mut p);
        let (m, w) = (pair.m.at(k + 1), pair.w.at(k + 1));
        let mut integrand = p.clone();
        for i in 0..n {
            let x = grid.point(i);
            let wi = node_slice(w, n, d, i);
            let gl = spec.grad_w_tilde_l(t, &x[..d], m[i], &wi[..d])?;
            for a in 0..d {
                integrand[a * n + i] += gl[a];
            }
        }
        total += time.dt() * inner(&integrand, direction.w.at(k + 1), &grid);
    }
    Ok(total)
}

/// Solves the control optimality system with the fully implicit scheme and no
/// regularization.
pub fn mftc_solve(spec: &HamiltonianSpec, data: &ProblemData, config: &SolverConfig, opts: &PicardOptions) -> Result<(MFGSolution, ConvergenceReport)> {
    let spec = spec.without_regularization();
    let config = config.with_scheme(Scheme::FullyImplicit);
    picard_driver(&spec, data, &config, opts, System::Control)
}

/// Game solve on the same footing as [`mftc_solve`].
pub fn mfg_for_comparison(spec: &HamiltonianSpec, data: &ProblemData, config: &SolverConfig, opts: &PicardOptions) -> Result<(MFGSolution, ConvergenceReport)> {
    let spec = spec.without_regularization();
    let config = config.with_scheme(Scheme::FullyImplicit);
    picard_driver(&spec, data, &config, opts, System::Game)
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub du_sup: f64,
    pub dm_sup: f64,
    pub j_mfg: f64,
    pub j_mftc: f64,
    pub mfg_converged: bool,
    pub mftc_converged: bool,
    pub mfg_iterations: usize,
    pub mftc_iterations: usize,
}

pub fn compare_mfg_mftc(spec: &HamiltonianSpec, data: &ProblemData, config: &SolverConfig, opts: &PicardOptions) -> Result<(Comparison, MFGSolution, MFGSolution)> {
    let (game, grep) = mfg_for_comparison(spec, data, config, opts)?;
    let (control, crep) = mftc_solve(spec, data, config, opts)?;
    let bare = spec.without_regularization();
    let j_mfg = objective_j(&ControlPair::from_solution(&game), &bare, data)?;
    let j_mftc = objective_j(&ControlPair::from_solution(&control), &bare, data)?;
    let cmp = Comparison {
        du_sup: game.u.sup_distance(&control.u)?,
        dm_sup: game.m.sup_distance(&control.m)?,
        j_mfg,
        j_mftc,
        mfg_converged: grep.converged,
        mftc_converged: crep.converged,
        mfg_iterations: grep.iterations,
        mftc_iterations: crep.iterations,
    };
    Ok((cmp, game, control))
}

/// Sampled midpoint convexity of `L~` in `(m, w)`; returns the worst excess
/// `L~(mid) - (L~(a) + L~(b))/2` relative to the scale of the endpoints.
pub fn tilde_l_convexity_excess(spec: &HamiltonianSpec, dim: usize, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let x = [0.3, 0.7];
    for _ in 0..samples {
        let ma = 10f64.powf(rng.gen_range(-2.0..1.0));
        let mb = 10f64.powf(rng.gen_range(-2.0..1.0));
        let wa: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let wb: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mm = 0.5 * (ma + mb);
        let wm: Vec<f64> = wa.iter().zip(&wb).map(|(a, b)| 0.5 * (a + b)).collect();
        let la = spec.tilde_l(0.0, &x[..dim], ma, &wa)?;
        let lb = spec.tilde_l(0.0, &x[..dim], mb, &wb)?;
        let lm = spec.tilde_l(0.0, &x[..dim], mm, &wm)?;
        worst = worst.max((lm - 0.5 * (la + lb)) / (1.0 + la.abs() + lb.abs()));
    }
    Ok(worst)
}
