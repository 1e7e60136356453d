//! Core objects built from a [`Config`].

use mfg_congestion::hamiltonian::hypotheses;
use mfg_congestion::mfg::InitialGuess;
use mfg_congestion::{
    Boundary, Congestion, Coupling, Grid, HamiltonianSpec, InitialDensity, NewtonOptions, PicardOptions, ProblemData, Scheme,
    SolverConfig, TimeGrid,
};

use crate::config::{BoundaryKind, Config, CouplingConfig, CouplingKind, DensityKind, FamilyKind, GuessKind, SchemeKind};

pub struct Scenario {
    pub grid: Grid,
    pub time: TimeGrid,
    pub spec: HamiltonianSpec,
    pub data: ProblemData,
    pub solver: SolverConfig,
    pub picard: PicardOptions,
    pub newton: NewtonOptions,
}

fn coupling(c: &CouplingConfig) -> mfg_congestion::Result<Coupling> {
    match c.kind {
        CouplingKind::Zero => Ok(Coupling::zero()),
        CouplingKind::Constant => Ok(Coupling::constant(c.a)),
        CouplingKind::Power => Coupling::power(c.a, c.q),
    }
}

fn guess(kind: GuessKind) -> InitialGuess {
    match kind {
        GuessKind::HeatFlow => InitialGuess::HeatFlow,
        GuessKind::Stationary => InitialGuess::Stationary,
    }
}

pub fn boundary(kind: BoundaryKind) -> Boundary {
    match kind {
        BoundaryKind::Periodic => Boundary::Periodic,
        BoundaryKind::Neumann => Boundary::Neumann,
    }
}

pub fn spec(c: &Config) -> mfg_congestion::Result<HamiltonianSpec> {
    let h = &c.hamiltonian;
    let base = match h.family {
        FamilyKind::Canonical => HamiltonianSpec::canonical(h.r, h.alpha)?,
        FamilyKind::Saturating => HamiltonianSpec::general(h.r, Congestion::saturating(h.c, h.beta), h.lambda, h.envelope_c)?,
    };
    base.with_eps(h.eps)
}

pub fn solver_config(c: &Config, time: TimeGrid) -> SolverConfig {
    let scheme = match c.solver.scheme {
        SchemeKind::SemiImplicit => Scheme::SemiImplicit,
        SchemeKind::FullyImplicit => Scheme::FullyImplicit,
    };
    SolverConfig {
        scheme,
        inner_tol: c.solver.inner_tol,
        inner_max_iter: c.solver.inner_max_iter,
        positivity_floor: c.solver.positivity_floor,
        ..SolverConfig::new(time)
    }
}

impl Scenario {
    pub fn build(c: &Config) -> mfg_congestion::Result<Self> {
        let grid = Grid::new(c.grid.dim, c.grid.n, c.grid.side, boundary(c.grid.boundary))?;
        let time = TimeGrid::new(c.time.horizon, c.time.steps)?;
        let spec = spec(c)?;
        if !hypotheses::growth_rate_holds(spec.r(), grid.dim()) {
            log::warn!("growth condition r < (d + 2) / (d + 1) fails for r = {}, d = {}", spec.r(), grid.dim());
        }
        let m0 = match c.initial.kind {
            DensityKind::Uniform => InitialDensity::Uniform,
            DensityKind::Bump => InitialDensity::Bump { amplitude: c.initial.amplitude, phase: c.initial.phase },
        };
        let data = ProblemData::from_kind(grid, coupling(&c.coupling.f)?, coupling(&c.coupling.g)?, &m0)?;
        let solver = solver_config(c, time);
        solver.validate()?;
        let p = &c.picard;
        let picard = PicardOptions {
            damping: p.damping,
            tol: p.tol,
            max_outer: p.max_outer,
            continuation: p.continuation,
            initial: guess(p.initial),
            anderson: p.anderson,
        };
        let newton = NewtonOptions { initial: guess(c.newton.initial), tol: c.newton.tol, max_iter: c.newton.max_iter };
        Ok(Self { grid, time, spec, data, solver, picard, newton })
    }

    /// Same scenario on another horizon, with the step count unchanged.
    pub fn with_horizon(&self, c: &Config, horizon: f64) -> mfg_congestion::Result<Self> {
        let time = TimeGrid::new(horizon, self.time.steps())?;
        Ok(Self {
            grid: self.grid,
            time,
            spec: self.spec.clone(),
            data: self.data.clone(),
            solver: solver_config(c, time),
            picard: self.picard.clone(),
            newton: self.newton.clone(),
        })
    }
}
