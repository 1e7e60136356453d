//! Damped Picard iteration on the fixed-point map `mu -> FP(HJB(mu))`, the monolithic
//! space-time Newton oracle, and discrete residuals of a computed pair.

use log::{debug, info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeField;
use crate::hamiltonian::HamiltonianSpec;
use crate::linalg::{BandLu, TripletBuilder};
use crate::operators::integrate;
use crate::pde::{bounds_tracker, BoundsReport, Discretization, SolverConfig, System};
use crate::problem::ProblemData;

/// A computed pair `(u, m)` with its drift `b = grad_p H(m, grad u)` and the inputs that
/// produced it (after regularization).
#[derive(Clone, Debug)]
pub struct MFGSolution {
    pub u: SpaceTimeField,
    pub m: SpaceTimeField,
    pub drift: SpaceTimeField,
    pub spec: HamiltonianSpec,
    pub data: ProblemData,
    pub config: SolverConfig,
    pub system: System,
}

impl MFGSolution {
    pub(crate) fn assemble(
        disc: &Discretization<'_>,
        u: SpaceTimeField,
        m: SpaceTimeField,
    ) -> Result<Self> {
        let drift = disc.drift_field(&u, &m)?;
        Ok(Self { u, m, drift, spec: disc.spec.clone(), data: disc.data.clone(), config: disc.config, system: disc.system })
    }

    pub(crate) fn discretization(&self) -> Result<Discretization<'_>> {
        Discretization::new(&self.spec, &self.data, &self.config, self.system)
    }

    /// `w = -m b`.
    pub fn momentum(&self) -> SpaceTimeField {
        let n = self.m.grid().len();
        let mut w = self.drift.clone();
        for k in 0..=self.m.time().steps() {
            let mk = self.m.at(k).to_vec();
            for (j, v) in w.at_mut(k).iter_mut().enumerate() {
                *v *= -mk[j % n];
            }
        }
        w
    }
}

/// Couplings actually used by a solve: `min(f, 1/eps)` and `min(g, 1/eps)` when `eps > 0`.
pub fn effective_data(spec: &HamiltonianSpec, data: &ProblemData) -> Result<ProblemData> {
    if spec.eps() > 0.0 {
        data.regularize(spec.eps())
    } else {
        Ok(data.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residuals {
    pub hjb_sup: f64,
    pub hjb_l2: f64,
    pub fp_sup: f64,
    pub fp_l2: f64,
    /// `max_k |int m_k - int m_0|`.
    pub mass_err: f64,
}

/// Strong-form residuals of the discrete system, including the terminal and initial rows.
pub fn pde_residuals(sol: &MFGSolution) -> Result<Residuals> {
    let disc = sol.discretization()?;
    let grid = *sol.m.grid();
    let time = *sol.m.time();
    let steps = time.steps();
    let (mut hs, mut hl, mut fs, mut fl) = (0.0_f64, 0.0, 0.0_f64, 0.0);
    for k in 0..steps {
        let h = disc.hjb_residual(k, sol.u.at(k), sol.u.at(k + 1), sol.m.at(k), sol.m.at(k + 1))?;
        let f = disc.fp_residual(k, sol.m.at(k), sol.m.at(k + 1), sol.u.at(k))?;
        for (i, (a, b)) in h.iter().zip(&f).enumerate() {
            hs = hs.max(a.abs());
            fs = fs.max(b.abs());
            hl += time.dt() * grid.weight(i) * a * a;
            fl += time.dt() * grid.weight(i) * b * b;
        }
    }
    let g = disc.terminal(sol.m.at(steps));
    for (a, b) in sol.u.at(steps).iter().zip(&g) {
        hs = hs.max((a - b).abs());
    }
    for (a, b) in sol.m.at(0).iter().zip(sol.data.m0()) {
        fs = fs.max((a - b).abs());
    }
    let mass0 = integrate(sol.m.at(0), &grid);
    let mass_err = (0..=steps).map(|k| (integrate(sol.m.at(k), &grid) - mass0).abs()).fold(0.0, f64::max);
    Ok(Residuals { hjb_sup: hs, hjb_l2: hl.sqrt(), fp_sup: fs, fp_l2: fl.sqrt(), mass_err })
}

#[derive(Clone, Debug)]
pub enum InitialGuess {
    /// Drift-free FP evolution of `m0`.
    HeatFlow,
    /// `m0` at every time.
    Stationary,
    Density(SpaceTimeField),
}

#[derive(Clone, Debug)]
pub struct PicardOptions {
    /// Relaxation `theta` in `(0, 1]`.
    pub damping: f64,
    /// Stop when `sup |Phi(m) - m| <= tol`.
    pub tol: f64,
    pub max_outer: usize,
    /// Warm-started `eps` ladder `1e-2 -> 1e-3 -> target` when the target `eps > 0`.
    pub continuation: bool,
    pub initial: InitialGuess,
    /// Anderson mixing depth on top of the damped step; 0 disables it.
    pub anderson: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-8, max_outer: 500, continuation: true, initial: InitialGuess::HeatFlow, anderson: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnosis {
    Converged,
    /// Deltas stopped decreasing and keep bouncing.
    Oscillation,
    /// Deltas grew well past their minimum or became non-finite.
    Divergence,
    /// Monotone but too slow for the iteration budget.
    SlowConvergence,
    /// An inner HJB/FP solve failed after the first outer iteration.
    InnerFailure,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Outer iterations summed over all continuation stages.
    pub iterations: usize,
    pub delta_m: Vec<f64>,
    pub delta_u: Vec<f64>,
    pub stages: Vec<StageReport>,
    pub residuals: Residuals,
    pub bounds: BoundsReport,
    pub converged: bool,
    pub diagnosis: Diagnosis,
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn final_delta(&self) -> f64 {
        self.delta_m.last().copied().unwrap_or(0.0)
    }
}

fn classify(deltas: &[f64]) -> Diagnosis {
    let Some(&last) = deltas.last() else { return Diagnosis::SlowConvergence };
    let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    if !last.is_finite() || last > 10.0 * min.max(f64::MIN_POSITIVE) {
        return Diagnosis::Divergence;
    }
    let tail = &deltas[deltas.len().saturating_sub(20)..];
    let rises = tail.windows(2).filter(|w| w[1] > w[0]).count();
    if rises * 4 >= tail.len() {
        Diagnosis::Oscillation
    } else {
        Diagnosis::SlowConvergence
    }
}

/// Type-II Anderson mixing: `x+ = x + theta g - (dX + theta dG) gamma` with
/// `gamma = argmin |g - dG gamma|_2` over the last `depth` differences.
struct Anderson {
    depth: usize,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    dx: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self { depth, prev: None, dx: Vec::new(), dg: Vec::new() }
    }

    fn reset(&mut self) {
        self.prev = None;
        self.dx.clear();
        self.dg.clear();
    }

    fn update(&mut self, x: &[f64], g: &[f64], theta: f64) -> Option<Vec<f64>> {
        if let Some((px, pg)) = self.prev.take() {
            self.dx.push(x.iter().zip(&px).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(&pg).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.depth {
                self.dx.remove(0);
                self.dg.remove(0);
            }
        }
        self.prev = Some((x.to_vec(), g.to_vec()));
        if self.dg.is_empty() {
            return None;
        }
        let cols = self.dg.len();
        let mat = nalgebra::DMatrix::from_fn(g.len(), cols, |i, j| self.dg[j][i]);
        let rhs = nalgebra::DVector::from_column_slice(g);
        let svd = mat.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let gamma = svd.solve(&rhs, cutoff).ok()?;
        let mut out: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + theta * b).collect();
        for (j, gj) in gamma.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o -= gj * (self.dx[j][i] + theta * self.dg[j][i]);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub(crate) struct StageOutcome {
    pub u: SpaceTimeField,
    pub m: SpaceTimeField,
    pub converged: bool,
    pub iterations: usize,
    pub failure: Option<String>,
}

/// One Picard run at fixed regularization.
pub(crate) fn picard_stage(
    disc: &Discretization<'_>,
    start: SpaceTimeField,
    opts: &PicardOptions,
    delta_m: &mut Vec<f64>,
    delta_u: &mut Vec<f64>,
) -> Result<StageOutcome> {
    let theta = opts.damping;
    let mut anderson = (opts.anderson > 0).then(|| Anderson::new(opts.anderson));
    let mut mu = start;
    let mut prev_u: Option<SpaceTimeField> = None;
    let mut best: Option<(f64, SpaceTimeField, SpaceTimeField, SpaceTimeField)> = None;
    for it in 1..=opts.max_outer {
        let step = disc.solve_hjb(&mu).and_then(|u| disc.solve_fp(&u).map(|m| (u, m)));
        let (u, phi) = match step {
            Ok(pair) => pair,
            Err(e) if it == 1 || best.is_none() => return Err(Error::OuterIteration { iteration: it, source: Box::new(e) }),
            Err(e) => {
                warn!("outer iteration {it}: {e}");
                let (_, u, m, _) = best.expect("checked above");
                return Ok(StageOutcome { u, m, converged: false, iterations: it - 1, failure: Some(format!("outer iteration {it}: {e}")) });
            }
        };
        let dm = sup_diff(phi.values(), mu.values());
        let du = prev_u.as_ref().map_or(u.sup_abs(), |p| sup_diff(u.values(), p.values()));
        delta_m.push(dm);
        delta_u.push(du);
        debug!("picard {it}: delta_m {dm:.3e}, delta_u {du:.3e}");
        if dm <= opts.tol {
            return Ok(StageOutcome { u, m: phi, converged: true, iterations: it, failure: None });
        }
        if !dm.is_finite() {
            break;
        }
        let g: Vec<f64> = phi.values().iter().zip(mu.values()).map(|(p, x)| p - x).collect();
        let mut next = mu.clone();
        for (v, r) in next.values_mut().iter_mut().zip(&g) {
            *v += theta * r;
        }
        if let Some(acc) = anderson.as_mut() {
            if best.as_ref().is_some_and(|b| dm > 1e3 * b.0) {
                acc.reset();
            }
            if let Some(x) = acc.update(mu.values(), &g, theta) {
                if x.iter().all(|v| *v > 0.0) {
                    next.values_mut().copy_from_slice(&x);
                } else {
                    acc.reset();
                }
            }
        }
        if best.as_ref().is_none_or(|b| dm < b.0) {
            best = Some((dm, u.clone(), phi, mu));
        }
        prev_u = Some(u);
        mu = next;
    }
    let iterations = delta_m.len();
    let (_, u, m, _) = best.ok_or_else(|| Error::OuterIteration {
        iteration: 1,
        source: Box::new(Error::InvalidParameter("first outer iterate is not finite".into())),
    })?;
    Ok(StageOutcome { u, m, converged: false, iterations, failure: None })
}

pub(crate) fn initial_density(disc: &Discretization<'_>, guess: &InitialGuess) -> Result<SpaceTimeField> {
    let grid = *disc.grid();
    let time = *disc.time();
    match guess {
        InitialGuess::HeatFlow => disc.solve_fp(&SpaceTimeField::scalar(grid, time)),
        InitialGuess::Stationary => SpaceTimeField::constant_in_time(grid, time, 1, disc.data.m0()),
        InitialGuess::Density(m) => {
            disc.check_scalar_field(m)?;
            Ok(m.clone())
        }
    }
}

pub(crate) fn eps_ladder(target: f64, continuation: bool) -> Vec<f64> {
    let mut ladder: Vec<f64> = if continuation && target > 0.0 { [1e-2, 1e-3].into_iter().filter(|e| *e > target).collect() } else { Vec::new() };
    ladder.push(target);
    ladder
}

pub(crate) fn picard_driver(
    spec: &HamiltonianSpec,
    data: &ProblemData,
    config: &SolverConfig,
    opts: &PicardOptions,
    system: System,
) -> Result<(MFGSolution, ConvergenceReport)> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !(opts.tol > 0.0) || opts.max_outer == 0 {
        return Err(Error::InvalidParameter("need tol > 0 and max_outer >= 1".into()));
    }
    let (mut delta_m, mut delta_u) = (Vec::new(), Vec::new());
    let mut stages = Vec::new();
    let mut warm: Option<SpaceTimeField> = None;
    let mut last = None;
    for eps in eps_ladder(spec.eps(), opts.continuation) {
        let stage_spec = spec.clone().with_eps(eps)?;
        let stage_data = effective_data(&stage_spec, data)?;
        let disc = Discretization::new(&stage_spec, &stage_data, config, system)?;
        let start = match warm.take() {
            Some(m) => m,
            None => initial_density(&disc, &opts.initial)?,
        };
        let out = picard_stage(&disc, start, opts, &mut delta_m, &mut delta_u)?;
        info!("stage eps={eps:e}: {} iterations, converged {}", out.iterations, out.converged);
        stages.push(StageReport { eps, iterations: out.iterations, converged: out.converged });
        let converged = out.converged;
        warm = Some(out.m.clone());
        last = Some((stage_spec, stage_data, out));
        if !converged {
            break;
        }
    }
    let (stage_spec, stage_data, out) = last.expect("ladder is never empty");
    let disc = Discretization::new(&stage_spec, &stage_data, config, system)?;
    let converged = out.converged && stages.len() == eps_ladder(spec.eps(), opts.continuation).len();
    let sol = MFGSolution::assemble(&disc, out.u, out.m)?;
    let residuals = pde_residuals(&sol)?;
    let bounds = bounds_tracker(&sol.m, Some(&sol.drift), spec.r_conj());
    let diagnosis = if converged {
        Diagnosis::Converged
    } else if out.failure.is_some() {
        Diagnosis::InnerFailure
    } else {
        classify(&delta_m)
    };
    let report = ConvergenceReport {
        iterations: delta_m.len(),
        delta_m,
        delta_u,
        stages,
        residuals,
        bounds,
        converged,
        diagnosis,
        failure: out.failure,
    };
    Ok((sol, report))
}

/// Damped Picard iteration `m <- (1 - theta) m + theta Phi(m)`. Returns the last pair
/// `(u_m, Phi(m))`; non-convergence is reported, not raised.
pub fn picard_solve(spec: &HamiltonianSpec, data: &ProblemData, config: &SolverConfig, opts: &PicardOptions) -> Result<(MFGSolution, ConvergenceReport)> {
    picard_driver(spec, data, config, opts, System::Game)
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub initial: InitialGuess,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { initial: InitialGuess::Stationary, tol: 1e-10, max_iter: 60 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub unknowns: usize,
    pub bandwidth: usize,
}

/// Stacked unknowns `[u_0, m_0, u_1, m_1, ..., u_K, m_K]`; row block `k` holds `HJB_k`
/// (terminal condition at `k = K`) and `FP_{k-1}` (initial condition at `k = 0`).
struct Monolithic<'a, 'b> {
    disc: &'b Discretization<'a>,
    n: usize,
    steps: usize,
}

impl Monolithic<'_, '_> {
    fn len(&self) -> usize {
        2 * self.n * (self.steps + 1)
    }

    fn u<'x>(&self, x: &'x [f64], k: usize) -> &'x [f64] {
        &x[2 * self.n * k..2 * self.n * k + self.n]
    }

    fn m<'x>(&self, x: &'x [f64], k: usize) -> &'x [f64] {
        &x[2 * self.n * k + self.n..2 * self.n * (k + 1)]
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut out = vec![0.0; self.len()];
        for k in 0..=self.steps {
            let base = 2 * n * k;
            if k < self.steps {
                let r = self.disc.hjb_residual(k, self.u(x, k), self.u(x, k + 1), self.m(x, k), self.m(x, k + 1))?;
                out[base..base + n].copy_from_slice(&r);
            } else {
                let g = self.disc.terminal(self.m(x, k));
                for i in 0..n {
                    out[base + i] = self.u(x, k)[i] - g[i];
                }
            }
            if k == 0 {
                for i in 0..n {
                    out[base + n + i] = self.m(x, 0)[i] - self.disc.data.m0()[i];
                }
            } else {
                let r = self.disc.fp_residual(k - 1, self.m(x, k - 1), self.m(x, k), self.u(x, k - 1))?;
                out[base + n..base + 2 * n].copy_from_slice(&r);
            }
        }
        Ok(out)
    }

    fn bandwidth(&self) -> usize {
        4 * self.n - 1
    }

    /// Central-difference Jacobian, one residual pair per column color.
    fn jacobian(&self, x: &[f64]) -> Result<BandLu> {
        let len = self.len();
        let bw = self.bandwidth();
        let colors = 2 * bw + 1;
        let mut b = TripletBuilder::with_capacity(len, len * (2 * bw + 1).min(len));
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for color in 0..colors.min(len) {
            let cols: Vec<usize> = (color..len).step_by(colors).collect();
            let steps: Vec<f64> = cols.iter().map(|&j| 1e-6 * (1.0 + x[j].abs())).collect();
            for (&j, &h) in cols.iter().zip(&steps) {
                xp[j] = x[j] + h;
                xm[j] = x[j] - h;
            }
            let rp = self.residual(&xp)?;
            let rm = self.residual(&xm)?;
            for (&j, &h) in cols.iter().zip(&steps) {
                xp[j] = x[j];
                xm[j] = x[j];
                let lo = j.saturating_sub(bw);
                let hi = (j + bw).min(len - 1);
                for i in lo..=hi {
                    let v = (rp[i] - rm[i]) / (2.0 * h);
                    if v != 0.0 {
                        b.push(i, j, v);
                    }
                }
            }
        }
        BandLu::factor(&b.build(), None)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Solves all discrete equations at once by damped Newton with a colored finite-difference
/// Jacobian. Meant for small lattices.
pub fn newton_oracle_solve(spec: &HamiltonianSpec, data: &ProblemData, config: &SolverConfig, opts: &NewtonOptions) -> Result<(MFGSolution, NewtonReport)> {
    newton_driver(spec, data, config, opts, System::Game)
}

pub(crate) fn newton_driver(
    spec: &HamiltonianSpec,
    data: &ProblemData,
    config: &SolverConfig,
    opts: &NewtonOptions,
    system: System,
) -> Result<(MFGSolution, NewtonReport)> {
    let eff = effective_data(spec, data)?;
    let disc = Discretization::new(spec, &eff, config, system)?;
    let n = disc.n();
    let steps = disc.time().steps();
    let mono = Monolithic { disc: &disc, n, steps };
    let m_guess = initial_density(&disc, &opts.initial)?;
    let u_end = disc.terminal(m_guess.at(steps));
    let mut x = vec![0.0; mono.len()];
    for k in 0..=steps {
        x[2 * n * k..2 * n * k + n].copy_from_slice(&u_end);
        x[2 * n * k + n..2 * n * (k + 1)].copy_from_slice(m_guess.at(k));
    }
    let mut res = mono.residual(&x)?;
    let mut norm = sup(&res);
    let mut history = vec![norm];
    let mut iterations = 0;
    while norm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NewtonStagnation { iterations, history });
        }
        iterations += 1;
        let lu = mono.jacobian(&x)?;
        let delta = lu.solve(&res);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a - step * d).collect();
            if let Ok(r) = mono.residual(&trial) {
                let nr = sup(&r);
                if nr.is_finite() && nr < (1.0 - 1e-4 * step) * norm {
                    x = trial;
                    res = r;
                    norm = nr;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        history.push(norm);
        debug!("newton {iterations}: residual {norm:.3e}, step {step}");
        if !accepted {
            return Err(Error::NewtonStagnation { iterations, history });
        }
    }
    let grid = *disc.grid();
    let time = *disc.time();
    let mut u = SpaceTimeField::scalar(grid, time);
    let mut m = SpaceTimeField::scalar(grid, time);
    for k in 0..=steps {
        u.set(k, mono.u(&x, k));
        m.set(k, mono.m(&x, k));
    }
    let sol = MFGSolution::assemble(&disc, u, m)?;
    Ok((sol, NewtonReport { iterations, residual_history: history, unknowns: mono.len(), bandwidth: mono.bandwidth() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, Grid, TimeGrid};
    use crate::pde::Scheme;
    use crate::problem::{Coupling, InitialDensity};

    fn canonical(n: usize, steps: usize, horizon: f64, boundary: Boundary) -> (HamiltonianSpec, ProblemData, SolverConfig) {
        let grid = Grid::unit(1, n, boundary).unwrap();
        let spec = HamiltonianSpec::canonical(1.4, 0.5).unwrap();
        let data = ProblemData::from_kind(
            grid,
            Coupling::power(1.0, 1.0).unwrap(),
            Coupling::power(1.0, 1.0).unwrap(),
            &InitialDensity::Bump { amplitude: 0.5, phase: 0.0 },
        )
        .unwrap();
        (spec, data, SolverConfig::new(TimeGrid::new(horizon, steps).unwrap()))
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let grid = Grid::unit(1, 16, Boundary::Periodic).unwrap();
        let spec = HamiltonianSpec::canonical(1.4, 0.0).unwrap();
        let data = ProblemData::from_kind(grid, Coupling::zero(), Coupling::zero(), &InitialDensity::Uniform).unwrap();
        let cfg = SolverConfig::new(TimeGrid::new(0.1, 8).unwrap());
        let (sol, rep) = picard_solve(&spec, &data, &cfg, &PicardOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(sol.u.sup_abs() == 0.0);
        assert!(sol.m.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let (o, orep) = newton_oracle_solve(&spec, &data, &cfg, &NewtonOptions::default()).unwrap();
        assert_eq!(orep.iterations, 0);
        assert!(o.u.sup_abs() == 0.0);
    }

    #[test]
    fn picard_matches_oracle() {
        for scheme in [Scheme::SemiImplicit, Scheme::FullyImplicit] {
            let (spec, data, cfg) = canonical(16, 16, 0.1, Boundary::Neumann);
            let cfg = cfg.with_scheme(scheme);
            let opts = PicardOptions { tol: 1e-12, ..PicardOptions::default() };
            let (p, rep) = picard_solve(&spec, &data, &cfg, &opts).unwrap();
            assert!(rep.converged, "{:?} {:?} {:?}", rep.diagnosis, rep.failure, &rep.delta_m[rep.delta_m.len().saturating_sub(8)..]);
            assert!(rep.residuals.hjb_sup <= 1e-9 && rep.residuals.fp_sup <= 1e-9, "{:?}", rep.residuals);
            let (o, _) = newton_oracle_solve(&spec, &data, &cfg, &NewtonOptions::default()).unwrap();
            let r = pde_residuals(&o).unwrap();
            assert!(r.hjb_sup <= 1e-10 && r.fp_sup <= 1e-10);
            let du = p.u.sup_distance(&o.u).unwrap();
            let dm = p.m.sup_distance(&o.m).unwrap();
            assert!(du <= 1e-9 && dm <= 1e-9, "{scheme:?}: {du:e} {dm:e}");
        }
    }

    #[test]
    fn damping_does_not_change_the_limit() {
        let (spec, data, cfg) = canonical(24, 16, 0.1, Boundary::Neumann);
        let mut sols = Vec::new();
        for theta in [0.3, 0.5, 0.7] {
            let opts = PicardOptions { damping: theta, tol: 1e-11, ..PicardOptions::default() };
            let (s, rep) = picard_solve(&spec, &data, &cfg, &opts).unwrap();
            assert!(rep.converged, "theta {theta}: {:?}", rep.diagnosis);
            sols.push(s);
        }
        for s in &sols[1..] {
            assert!(s.m.sup_distance(&sols[0].m).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn perturbed_solution_has_large_residual() {
        let (spec, data, cfg) = canonical(16, 8, 0.1, Boundary::Periodic);
        let (mut sol, _) = picard_solve(&spec, &data, &cfg, &PicardOptions { tol: 1e-12, ..PicardOptions::default() }).unwrap();
        let delta = 1e-4;
        sol.u.at_mut(3)[5] += delta;
        let r = pde_residuals(&sol).unwrap();
        assert!(r.hjb_sup >= 0.5 * delta / cfg.time.dt());
    }

    #[test]
    fn regularized_run_uses_continuation() {
        let (spec, data, cfg) = canonical(16, 16, 0.1, Boundary::Neumann);
        let spec = spec.with_eps(1e-4).unwrap();
        let (_, rep) = picard_solve(&spec, &data, &cfg, &PicardOptions::default()).unwrap();
        assert!(rep.converged);
        let eps: Vec<f64> = rep.stages.iter().map(|s| s.eps).collect();
        assert_eq!(eps, vec![1e-2, 1e-3, 1e-4]);
        assert_eq!(rep.iterations, rep.stages.iter().map(|s| s.iterations).sum::<usize>());
    }

    #[test]
    fn diagnosis_classifier() {
        assert_eq!(classify(&[1.0, 0.5, 20.0]), Diagnosis::Divergence);
        assert_eq!(classify(&[1.0, 0.5, 0.6, 0.5, 0.6, 0.5, 0.6]), Diagnosis::Oscillation);
        assert_eq!(classify(&[1.0, 0.9, 0.8, 0.7]), Diagnosis::SlowConvergence);
    }
}
