//! Backward HJB and forward Fokker-Planck solves, the two halves of the fixed-point map.
//!
//! Discrete system on `t_k = k dt`, with `G` the centered gradient, `D = -G^T` its
//! weighted adjoint and `Delta` the compact Laplacian:
//!
//! ```text
//! HJB_k : (u_k - u_{k+1})/dt - Delta u_k + H(t*, m*, G u*) - f(t*, m*) = 0
//!         SemiImplicit : (t*, m*, u*) = (t_k, m_k, u_{k+1})
//!         FullyImplicit: (t*, m*, u*) = (t_{k+1}, m_{k+1}, u_k)
//! FP_k  : (m_{k+1} - m_k)/dt - Delta m_{k+1} - D(m_{k+1} grad_p H(t_{k+1}, m_{k+1}, G u_k)) = 0
//! u_K = g(m_K),  m_0 = m0
//! ```
//!
//! The control system adds `m dH/dm` to the Hamiltonian slot of `HJB_k`. With `eps > 0`
//! the regularized `H_eps` replaces `H` everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField, TimeGrid};
use crate::hamiltonian::{HamiltonianSpec, Local};
use crate::linalg::{grid_ordering, BandLu, TripletBuilder};
use crate::operators::{
    add_divergence_of_product, add_identity, add_laplacian, add_transport, diffusion_matrix, divergence_into, gradient_into, laplacian_into,
    lp_norm,
};
use crate::problem::ProblemData;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit diffusion, Hamiltonian lagged at `u_{k+1}`: one linear solve per step.
    SemiImplicit,
    /// Hamiltonian at `u_k`, solved by damped Newton. This is the scheme whose HJB is the
    /// exact discrete adjoint of the FP step.
    FullyImplicit,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "semi-implicit" => Ok(Scheme::SemiImplicit),
            "fully-implicit" => Ok(Scheme::FullyImplicit),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Game (MFG) or control (MFTC) optimality system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Game,
    Control,
}

/// Time partition and inner-solver knobs.
///
/// The semi-implicit scheme treats transport explicitly; it stays monotone when
/// `dt * sup|grad_p H| <= h` (see [`SolverConfig::transport_cfl`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time: TimeGrid,
    pub scheme: Scheme,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Lower clamp on the density argument of `H` and `f` (not on `m` itself).
    pub positivity_floor: f64,
}

impl SolverConfig {
    pub fn new(time: TimeGrid) -> Self {
        Self { time, scheme: Scheme::SemiImplicit, inner_tol: 1e-10, inner_max_iter: 50, positivity_floor: 0.0 }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("inner tolerance must be positive, got {}", self.inner_tol)));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::InvalidParameter("inner iteration cap must be positive".into()));
        }
        if !(self.positivity_floor >= 0.0 && self.positivity_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("positivity floor must be >= 0, got {}", self.positivity_floor)));
        }
        Ok(())
    }

    /// `dt * drift_sup / h`.
    pub fn transport_cfl(&self, grid: &Grid, drift_sup: f64) -> f64 {
        self.time.dt() * drift_sup / grid.h()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Shared evaluator of the discrete system: step solvers and residuals.
pub(crate) struct Discretization<'a> {
    pub spec: &'a HamiltonianSpec,
    pub data: &'a ProblemData,
    pub config: SolverConfig,
    pub system: System,
    grid: Grid,
    points: Vec<[f64; 2]>,
    diffusion: BandLu,
}

impl<'a> Discretization<'a> {
    pub fn new(spec: &'a HamiltonianSpec, data: &'a ProblemData, config: &SolverConfig, system: System) -> Result<Self> {
        config.validate()?;
        let grid = *data.grid();
        let points = (0..grid.len()).map(|i| grid.point(i)).collect();
        let diffusion = BandLu::factor(&diffusion_matrix(&grid, config.time.dt()), Some(grid_ordering(&grid)))?;
        Ok(Self { spec, data, config: *config, system, grid, points, diffusion })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.config.time
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.points[i][..self.grid.dim()]
    }

    fn density(&self, m: f64) -> f64 {
        if self.config.positivity_floor > 0.0 {
            m.max(self.config.positivity_floor)
        } else {
            m
        }
    }

    pub fn check_scalar_field(&self, field: &SpaceTimeField) -> Result<()> {
        if field.grid() != &self.grid || field.time() != self.time() || field.components() != 1 {
            return Err(Error::GridMismatch("field does not live on the solver lattice".into()));
        }
        Ok(())
    }

    /// `(|p_i|, p)` with `p = G u`.
    pub fn gradient(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut p = vec![0.0; n * self.grid.dim()];
        gradient_into(&self.grid, u, &mut p);
        let s = (0..n).map(|i| (0..self.grid.dim()).map(|a| p[a * n + i].powi(2)).sum::<f64>().sqrt()).collect();
        (s, p)
    }

    /// Hamiltonian slot of the HJB (with the control term when applicable).
    pub fn hjb_local(&self, t: f64, i: usize, m: f64, s: f64) -> Result<Local> {
        let m = self.density(m);
        let mut loc = self.spec.solver_local(t, self.x(i), m, s)?;
        if self.system == System::Control {
            let extra = self.spec.control_local(t, self.x(i), m, s)?;
            loc.value += extra.value;
            loc.grad_coeff += extra.grad_coeff;
        }
        Ok(loc)
    }

    pub fn drift_coeff(&self, t: f64, i: usize, m: f64, s: f64) -> Result<f64> {
        Ok(self.spec.solver_local(t, self.x(i), self.density(m), s)?.grad_coeff)
    }

    pub fn f(&self, t: f64, i: usize, m: f64) -> f64 {
        self.data.f().eval(t, self.x(i), self.density(m))
    }

    pub fn terminal(&self, m_final: &[f64]) -> Vec<f64> {
        let t = self.time().horizon();
        (0..self.n()).map(|i| self.data.g().eval(t, self.x(i), self.density(m_final[i]))).collect()
    }

    /// `grad_p H(t, m, G u)` as a vector slice.
    pub fn drift(&self, t: f64, m: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let (s, mut p) = self.gradient(u);
        let n = self.n();
        for i in 0..n {
            let c = self.drift_coeff(t, i, m[i], s[i])?;
            for a in 0..self.grid.dim() {
                p[a * n + i] *= c;
            }
        }
        Ok(p)
    }

    fn hjb_point(&self, k: usize) -> (f64, bool) {
        match self.config.scheme {
            Scheme::SemiImplicit => (self.time().t(k), false),
            Scheme::FullyImplicit => (self.time().t(k + 1), true),
        }
    }

    /// Scaled residual of `HJB_k`.
    pub fn hjb_residual(&self, k: usize, u_k: &[f64], u_next: &[f64], m_k: &[f64], m_next: &[f64]) -> Result<Vec<f64>> {
        let dt = self.time().dt();
        let (t, implicit) = self.hjb_point(k);
        let (m_star, u_star) = if implicit { (m_next, u_k) } else { (m_k, u_next) };
        let (s, _) = self.gradient(u_star);
        let mut lap = vec![0.0; self.n()];
        laplacian_into(&self.grid, u_k, &mut lap);
        let mut out = vec![0.0; self.n()];
        for i in 0..self.n() {
            let h = self.hjb_local(t, i, m_star[i], s[i])?.value;
            out[i] = (u_k[i] - u_next[i]) / dt - lap[i] + h - self.f(t, i, m_star[i]);
        }
        Ok(out)
    }

    /// Scaled residual of `FP_k` (linking `m_k` to `m_{k+1}`).
    pub fn fp_residual(&self, k: usize, m_k: &[f64], m_next: &[f64], u_k: &[f64]) -> Result<Vec<f64>> {
        let dt = self.time().dt();
        let n = self.n();
        let mut flux = self.drift(self.time().t(k + 1), m_next, u_k)?;
        for (j, v) in flux.iter_mut().enumerate() {
            *v *= m_next[j % n];
        }
        let mut div = vec![0.0; n];
        divergence_into(&self.grid, &flux, &mut div);
        let mut lap = vec![0.0; n];
        laplacian_into(&self.grid, m_next, &mut lap);
        Ok((0..n).map(|i| (m_next[i] - m_k[i]) / dt - lap[i] - div[i]).collect())
    }

    fn step_failure(solver: &'static str, k: usize, reason: impl ToString, residual: f64, iterate: &[f64]) -> Error {
        Error::StepFailure { solver, time_index: k, reason: reason.to_string(), residual, iterate_norm: sup(iterate) }
    }

    /// Solves `HJB_k` for `u_k`.
    pub fn hjb_step(&self, k: usize, u_next: &[f64], m_k: &[f64], m_next: &[f64]) -> Result<Vec<f64>> {
        let dt = self.time().dt();
        let n = self.n();
        let (t, implicit) = self.hjb_point(k);
        let wrap = |e: Error, it: &[f64]| Self::step_failure("hjb", k, e, f64::NAN, it);
        let u = if !implicit {
            let (s, _) = self.gradient(u_next);
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                let h = self.hjb_local(t, i, m_k[i], s[i]).map_err(|e| wrap(e, u_next))?.value;
                rhs[i] = u_next[i] - dt * (h - self.f(t, i, m_k[i]));
            }
            self.diffusion.solve(&rhs)
        } else {
            self.hjb_newton(k, u_next, m_next)?
        };
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Self::step_failure("hjb", k, "non-finite value", f64::NAN, &u));
        }
        Ok(u)
    }

    fn hjb_newton(&self, k: usize, u_next: &[f64], m_next: &[f64]) -> Result<Vec<f64>> {
        let dt = self.time().dt();
        let n = self.n();
        let dim = self.grid.dim();
        let t = self.time().t(k + 1);
        let source: Vec<f64> = (0..n).map(|i| self.f(t, i, m_next[i])).collect();
        let eval = |u: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let (s, mut p) = self.gradient(u);
            let mut lap = vec![0.0; n];
            laplacian_into(&self.grid, u, &mut lap);
            let mut res = vec![0.0; n];
            for i in 0..n {
                let loc = self.hjb_local(t, i, m_next[i], s[i])?;
                res[i] = (u[i] - u_next[i]) / dt - lap[i] + loc.value - source[i];
                for a in 0..dim {
                    p[a * n + i] *= loc.grad_coeff;
                }
            }
            Ok((res, p))
        };
        let fail = |reason: String, res: f64, it: &[f64]| Self::step_failure("hjb", k, reason, res, it);
        let mut u = u_next.to_vec();
        let (mut res, mut transport) = eval(&u).map_err(|e| fail(e.to_string(), f64::NAN, &u))?;
        let mut norm = sup(&res);
        let scale = 1.0 + sup(u_next);
        let mut prev_update = f64::INFINITY;
        for _ in 0..self.config.inner_max_iter {
            let mut b = TripletBuilder::with_capacity(n, n * (1 + 5 * dim));
            add_identity(&mut b, n, 1.0);
            add_laplacian(&mut b, &self.grid, -dt);
            add_transport(&mut b, &self.grid, dt, &transport);
            let lu = BandLu::factor(&b.build(), Some(grid_ordering(&self.grid))).map_err(|e| fail(e.to_string(), norm, &u))?;
            let rhs: Vec<f64> = res.iter().map(|r| -dt * r).collect();
            let delta = lu.solve(&rhs);
            let update = sup(&delta);
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                if let Ok((r, tr)) = eval(&trial) {
                    let nr = sup(&r);
                    if nr.is_finite() && (nr < norm || nr <= 1e-14 * scale / dt) {
                        u = trial;
                        res = r;
                        transport = tr;
                        norm = nr;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted || update <= 1e-15 * scale || (update > 0.5 * prev_update && norm <= self.config.inner_tol) {
                break;
            }
            prev_update = update;
        }
        if norm <= self.config.inner_tol {
            Ok(u)
        } else {
            Err(fail("Newton did not reach the inner tolerance".into(), norm, &u))
        }
    }

    /// Solves `FP_k` for `m_{k+1}` by inner Picard on the density argument of the drift.
    pub fn fp_step(&self, k: usize, m_k: &[f64], u_k: &[f64]) -> Result<Vec<f64>> {
        let dt = self.time().dt();
        let n = self.n();
        let dim = self.grid.dim();
        let t = self.time().t(k + 1);
        let (s, p) = self.gradient(u_k);
        let fail = |reason: String, res: f64, it: &[f64]| Self::step_failure("fp", k, reason, res, it);
        let mut m = m_k.to_vec();
        let mut delta = f64::INFINITY;
        let mut coef = vec![0.0; n * dim];
        for _ in 0..self.config.inner_max_iter {
            for i in 0..n {
                let c = self.drift_coeff(t, i, m[i], s[i]).map_err(|e| fail(e.to_string(), f64::NAN, &m))?;
                for a in 0..dim {
                    coef[a * n + i] = c * p[a * n + i];
                }
            }
            let mut b = TripletBuilder::with_capacity(n, n * (1 + 5 * dim));
            add_identity(&mut b, n, 1.0);
            add_laplacian(&mut b, &self.grid, -dt);
            add_divergence_of_product(&mut b, &self.grid, -dt, &coef);
            let lu = BandLu::factor(&b.build(), Some(grid_ordering(&self.grid))).map_err(|e| fail(e.to_string(), delta, &m))?;
            let next = lu.solve(m_k);
            let d = next.iter().zip(&m).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
            m = next;
            if !m.iter().all(|v| v.is_finite()) {
                return Err(fail("non-finite density".into(), d, &m));
            }
            let stalled = d > 0.5 * delta && d <= self.config.inner_tol;
            delta = d;
            if d <= 1e-15 * sup(&m) || stalled {
                break;
            }
        }
        if delta > self.config.inner_tol {
            return Err(fail("inner drift iteration did not converge".into(), delta, &m));
        }
        let min = m.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(fail(format!("negative density {min:.3e}"), delta, &m));
        }
        Ok(m)
    }

    pub fn solve_hjb(&self, m: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_scalar_field(m)?;
        let steps = self.time().steps();
        let mut u = SpaceTimeField::scalar(self.grid, *self.time());
        u.set(steps, &self.terminal(m.at(steps)));
        for k in (0..steps).rev() {
            let next = self.hjb_step(k, u.at(k + 1), m.at(k), m.at(k + 1))?;
            u.set(k, &next);
        }
        Ok(u)
    }

    pub fn solve_fp(&self, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_scalar_field(u)?;
        let mut m = SpaceTimeField::scalar(self.grid, *self.time());
        m.set(0, self.data.m0());
        for k in 0..self.time().steps() {
            let next = self.fp_step(k, m.at(k), u.at(k))?;
            m.set(k + 1, &next);
        }
        Ok(m)
    }

    /// Drift field stored with the solution: `grad_p H(m_{k+1}, G u_k)` at node `k + 1`
    /// (the field transporting `m` into `t_{k+1}`), and `grad_p H(m_0, G u_0)` at node 0.
    pub fn drift_field(&self, u: &SpaceTimeField, m: &SpaceTimeField) -> Result<SpaceTimeField> {
        let mut b = SpaceTimeField::vector(self.grid, *self.time());
        b.set(0, &self.drift(0.0, m.at(0), u.at(0))?);
        for k in 0..self.time().steps() {
            b.set(k + 1, &self.drift(self.time().t(k + 1), m.at(k + 1), u.at(k))?);
        }
        Ok(b)
    }
}

/// Backward HJB solve of the game system for a given density trajectory.
pub fn solve_hjb_backward(spec: &HamiltonianSpec, data: &ProblemData, m: &SpaceTimeField, config: &SolverConfig) -> Result<SpaceTimeField> {
    solve_hjb_backward_system(spec, data, m, config, System::Game)
}

pub fn solve_hjb_backward_system(
    spec: &HamiltonianSpec,
    data: &ProblemData,
    m: &SpaceTimeField,
    config: &SolverConfig,
    system: System,
) -> Result<SpaceTimeField> {
    Discretization::new(spec, data, config, system)?.solve_hjb(m)
}

/// Forward conservative FP solve driven by `grad_p H(m, G u)`.
pub fn solve_fp_forward(spec: &HamiltonianSpec, data: &ProblemData, u: &SpaceTimeField, config: &SolverConfig) -> Result<SpaceTimeField> {
    Discretization::new(spec, data, config, System::Game)?.solve_fp(u)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepBounds {
    pub t: f64,
    pub sup_m: f64,
    pub inf_m: f64,
    pub inv_m_sup: f64,
    /// `|grad m(t)|_{L^2}`.
    pub h1_seminorm: f64,
    /// `|b(t)|_{L^r'}`, when a drift is supplied.
    pub drift_lr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub sup_m: f64,
    pub inf_m: f64,
    pub inv_m_sup: f64,
    /// `(int_0^T |grad m|_{L^2}^2 dt)^(1/2)`.
    pub l2h1_seminorm: f64,
    /// Space-time `L^r'` norm of the drift modulus.
    pub drift_lr: Option<f64>,
    pub steps: Vec<StepBounds>,
}

/// Monitors of the a priori bounds: extrema of `m`, `|1/m|_inf`, the `L^2 H^1` seminorm and
/// the `L^r'` norm of the drift.
pub fn bounds_tracker(m: &SpaceTimeField, drift: Option<&SpaceTimeField>, r_conj: f64) -> BoundsReport {
    let grid = *m.grid();
    let time = *m.time();
    let n = grid.len();
    let mut steps = Vec::with_capacity(time.steps() + 1);
    let (mut h1_sq, mut lr_pow) = (0.0, 0.0);
    for k in 0..=time.steps() {
        let mk = m.at(k);
        let sup_m = mk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inf_m = mk.iter().copied().fold(f64::INFINITY, f64::min);
        let mut grad = vec![0.0; n * grid.dim()];
        gradient_into(&grid, mk, &mut grad);
        let gmod: Vec<f64> = (0..n).map(|i| (0..grid.dim()).map(|a| grad[a * n + i].powi(2)).sum::<f64>().sqrt()).collect();
        let h1 = lp_norm(&gmod, &grid, 2.0);
        h1_sq += time.weight(k) * h1 * h1;
        let drift_lr = drift.map(|b| {
            let bk = b.at(k);
            let bmod: Vec<f64> = (0..n).map(|i| (0..grid.dim()).map(|a| bk[a * n + i].powi(2)).sum::<f64>().sqrt()).collect();
            let v = lp_norm(&bmod, &grid, r_conj);
            lr_pow += time.weight(k) * v.powf(r_conj);
            v
        });
        steps.push(StepBounds { t: time.t(k), sup_m, inf_m, inv_m_sup: 1.0 / inf_m, h1_seminorm: h1, drift_lr });
    }
    let sup_m = steps.iter().map(|s| s.sup_m).fold(f64::NEG_INFINITY, f64::max);
    let inf_m = steps.iter().map(|s| s.inf_m).fold(f64::INFINITY, f64::min);
    BoundsReport {
        sup_m,
        inf_m,
        inv_m_sup: 1.0 / inf_m,
        l2h1_seminorm: h1_sq.sqrt(),
        drift_lr: drift.map(|_| lr_pow.powf(1.0 / r_conj)),
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::operators::integrate;
    use crate::problem::{Coupling, InitialDensity};

    fn setup(boundary: Boundary, n: usize) -> (Grid, TimeGrid) {
        (Grid::unit(1, n, boundary).unwrap(), TimeGrid::new(0.2, 20).unwrap())
    }

    #[test]
    fn constants_propagate() {
        let (grid, time) = setup(Boundary::Periodic, 16);
        let spec = HamiltonianSpec::canonical(2.0, 0.0).unwrap();
        let data = ProblemData::from_kind(grid, Coupling::zero(), Coupling::constant(3.0), &InitialDensity::Uniform).unwrap();
        let m = SpaceTimeField::constant_in_time(grid, time, 1, data.m0()).unwrap();
        for scheme in [Scheme::SemiImplicit, Scheme::FullyImplicit] {
            let cfg = SolverConfig::new(time).with_scheme(scheme);
            let u = solve_hjb_backward(&spec, &data, &m, &cfg).unwrap();
            assert!(u.values().iter().all(|v| (v - 3.0).abs() < 1e-13));
            let mm = solve_fp_forward(&spec, &data, &u, &cfg).unwrap();
            assert!(mm.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn unit_source_gives_remaining_time() {
        let (grid, time) = setup(Boundary::Neumann, 12);
        let spec = HamiltonianSpec::canonical(1.5, 0.0).unwrap();
        let data = ProblemData::from_kind(grid, Coupling::constant(1.0), Coupling::zero(), &InitialDensity::Uniform).unwrap();
        let m = SpaceTimeField::constant_in_time(grid, time, 1, data.m0()).unwrap();
        let u = solve_hjb_backward(&spec, &data, &m, &SolverConfig::new(time)).unwrap();
        for k in 0..=time.steps() {
            for v in u.at(k) {
                assert!((v - (time.horizon() - time.t(k))).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fp_conserves_mass_and_positivity() {
        for boundary in [Boundary::Periodic, Boundary::Neumann] {
            for dim in [1, 2] {
                let grid = Grid::unit(dim, if dim == 1 { 32 } else { 12 }, boundary).unwrap();
                let time = TimeGrid::new(0.3, 15).unwrap();
                let spec = HamiltonianSpec::canonical(1.4, 0.5).unwrap();
                let data = ProblemData::from_kind(
                    grid,
                    Coupling::zero(),
                    Coupling::zero(),
                    &InitialDensity::Bump { amplitude: 0.6, phase: 0.1 },
                )
                .unwrap();
                let mut u = SpaceTimeField::scalar(grid, time);
                for k in 0..=time.steps() {
                    let t = time.t(k);
                    let slice = grid.sample(|x| (1.0 + t) * x.iter().map(|xi| (6.0 * xi).sin()).sum::<f64>());
                    u.set(k, &slice);
                }
                let m = solve_fp_forward(&spec, &data, &u, &SolverConfig::new(time)).unwrap();
                for k in 0..=time.steps() {
                    assert!((integrate(m.at(k), &grid) - 1.0).abs() <= 1e-12);
                    assert!(m.at(k).iter().all(|v| *v >= 0.0));
                }
            }
        }
    }

    /// HJB with `u* = (T - t) sin(2 pi x)`, `H = |p|^2 / 2`, and `f` the continuous residual.
    fn mms_error(n: usize, steps: usize) -> f64 {
        let horizon = 0.5;
        let grid = Grid::unit(1, n, Boundary::Periodic).unwrap();
        let time = TimeGrid::new(horizon, steps).unwrap();
        let spec = HamiltonianSpec::canonical(2.0, 0.0).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let f = Coupling::custom("mms", -1e3, move |t, x, _| {
            let (s, c) = ((tau * x[0]).sin(), (tau * x[0]).cos());
            let ux = (horizon - t) * tau * c;
            s + tau * tau * (horizon - t) * s + 0.5 * ux * ux
        });
        let data = ProblemData::from_kind(grid, f, Coupling::zero(), &InitialDensity::Uniform).unwrap();
        let m = SpaceTimeField::constant_in_time(grid, time, 1, data.m0()).unwrap();
        let u = solve_hjb_backward(&spec, &data, &m, &SolverConfig::new(time)).unwrap();
        let mut err = 0.0_f64;
        for k in 0..=steps {
            let exact = grid.sample(|x| (horizon - time.t(k)) * (tau * x[0]).sin());
            for (a, b) in u.at(k).iter().zip(&exact) {
                err = err.max((a - b).abs());
            }
        }
        err
    }

    #[test]
    fn manufactured_solution_converges() {
        let e1 = mms_error(16, 32);
        let e2 = mms_error(32, 128);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "errors {e1} {e2}, order {order}");
    }

    #[test]
    fn larger_source_gives_larger_value() {
        let (grid, time) = setup(Boundary::Periodic, 24);
        let spec = HamiltonianSpec::canonical(1.4, 0.5).unwrap();
        let m0 = InitialDensity::Bump { amplitude: 0.4, phase: 0.1 };
        let lo = ProblemData::from_kind(grid, Coupling::power(1.0, 1.0).unwrap(), Coupling::power(1.0, 1.0).unwrap(), &m0).unwrap();
        let hi = ProblemData::from_kind(grid, Coupling::power(2.0, 1.0).unwrap(), Coupling::power(1.0, 1.0).unwrap(), &m0).unwrap();
        let cfg = SolverConfig::new(time);
        let m = solve_fp_forward(&spec, &lo, &SpaceTimeField::scalar(grid, time), &cfg).unwrap();
        let ul = solve_hjb_backward(&spec, &lo, &m, &cfg).unwrap();
        let uh = solve_hjb_backward(&spec, &hi, &m, &cfg).unwrap();
        assert!(ul.values().iter().zip(uh.values()).all(|(a, b)| b >= a));
    }

    #[test]
    fn fully_implicit_step_satisfies_its_residual() {
        let (grid, time) = setup(Boundary::Neumann, 20);
        let spec = HamiltonianSpec::canonical(1.4, 0.5).unwrap();
        let data = ProblemData::from_kind(
            grid,
            Coupling::power(1.0, 1.0).unwrap(),
            Coupling::power(1.0, 1.0).unwrap(),
            &InitialDensity::Bump { amplitude: 0.5, phase: 0.1 },
        )
        .unwrap();
        let cfg = SolverConfig::new(time).with_scheme(Scheme::FullyImplicit);
        let disc = Discretization::new(&spec, &data, &cfg, System::Control).unwrap();
        let m = disc.solve_fp(&SpaceTimeField::scalar(grid, time)).unwrap();
        let u = disc.solve_hjb(&m).unwrap();
        for k in 0..time.steps() {
            let r = disc.hjb_residual(k, u.at(k), u.at(k + 1), m.at(k), m.at(k + 1)).unwrap();
            assert!(sup(&r) <= 1e-10, "{}", sup(&r));
        }
        let m2 = disc.solve_fp(&u).unwrap();
        for k in 0..time.steps() {
            let r = disc.fp_residual(k, m2.at(k), m2.at(k + 1), u.at(k)).unwrap();
            assert!(sup(&r) <= 1e-9, "{}", sup(&r));
        }
    }

    #[test]
    fn bounds_of_constant_density() {
        let (grid, time) = setup(Boundary::Periodic, 8);
        let m = SpaceTimeField::constant_in_time(grid, time, 1, &[1.0; 8]).unwrap();
        let rep = bounds_tracker(&m, None, 3.5);
        assert_eq!((rep.sup_m, rep.inf_m, rep.inv_m_sup, rep.l2h1_seminorm), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn solves_are_deterministic() {
        let (grid, time) = setup(Boundary::Periodic, 16);
        let spec = HamiltonianSpec::canonical(1.4, 0.5).unwrap();
        let data = ProblemData::from_kind(grid, Coupling::power(1.0, 1.0).unwrap(), Coupling::zero(), &InitialDensity::Bump { amplitude: 0.5, phase: 0.1 }).unwrap();
        let cfg = SolverConfig::new(time);
        let m = solve_fp_forward(&spec, &data, &SpaceTimeField::scalar(grid, time), &cfg).unwrap();
        let a = solve_hjb_backward(&spec, &data, &m, &cfg).unwrap();
        let b = solve_hjb_backward(&spec, &data, &m, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
