//! Manufactured-solution refinement study of the backward HJB solve.
//!
//! Periodic unit interval, density frozen at `m = 1`, exact value
//! `u*(t, x) = exp(-t) sin(2 pi x)`; the source is the continuous residual
//! `f = -u*_t - u*_xx + H(1, u*_x)` and the terminal datum is `u*(T, .)`.

use std::f64::consts::PI;
use std::sync::Arc;

use mfg_congestion::pde::solve_hjb_backward;
use mfg_congestion::{Boundary, Coupling, Grid, HamiltonianSpec, InitialDensity, ProblemData, SpaceTimeField, SolverConfig, TimeGrid};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub n: usize,
    pub steps: usize,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Study {
    pub levels: Vec<Level>,
    /// Observed orders between consecutive levels, in `h` (space) or `dt` (time).
    pub orders: Vec<f64>,
    pub min_order: f64,
}

fn exact(t: f64, x: f64) -> f64 {
    (-t).exp() * (2.0 * PI * x).sin()
}

/// Sup-norm error over all space-time nodes.
pub fn mms_error(spec: &HamiltonianSpec, base: &SolverConfig, n: usize, horizon: f64, steps: usize) -> mfg_congestion::Result<f64> {
    let grid = Grid::unit(1, n, Boundary::Periodic)?;
    let time = TimeGrid::new(horizon, steps)?;
    let tau = 2.0 * PI;
    let h_spec = Arc::new(spec.without_regularization());
    let f = Coupling::custom("manufactured source", -1e6, move |t, x, _| {
        let (s, c) = ((tau * x[0]).sin(), (tau * x[0]).cos());
        let e = (-t).exp();
        let ux = e * tau * c;
        let h = h_spec.eval_h(t, x, 1.0, &[ux]).unwrap_or(f64::NAN);
        e * s + tau * tau * e * s + h
    });
    let g = Coupling::custom("manufactured terminal", -1.0, move |_, x, _| exact(horizon, x[0]));
    let data = ProblemData::from_kind(grid, f, g, &InitialDensity::Uniform)?;
    let m = SpaceTimeField::constant_in_time(grid, time, 1, data.m0())?;
    let config = SolverConfig { time, ..*base };
    let u = solve_hjb_backward(&spec.without_regularization(), &data, &m, &config)?;
    let mut err = 0.0_f64;
    for k in 0..=steps {
        let t = time.t(k);
        for (i, v) in u.at(k).iter().enumerate() {
            err = err.max((v - exact(t, grid.point(i)[0])).abs());
        }
    }
    Ok(err)
}

fn study(levels: Vec<Level>, ratio: impl Fn(&Level, &Level) -> f64) -> Study {
    let orders: Vec<f64> = levels.windows(2).map(|w| (w[0].error / w[1].error).ln() / ratio(&w[0], &w[1]).ln()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Study { levels, orders, min_order }
}

/// Space study with `steps = ceil(steps_per_n2 n^2)`, so `dt ~ h^2`.
pub fn space_study(spec: &HamiltonianSpec, base: &SolverConfig, sizes: &[usize], steps_per_n2: f64, horizon: f64) -> mfg_congestion::Result<Study> {
    let mut levels = Vec::new();
    for &n in sizes {
        let steps = ((steps_per_n2 * (n * n) as f64).ceil() as usize).max(1);
        levels.push(Level { n, steps, error: mms_error(spec, base, n, horizon, steps)? });
    }
    Ok(study(levels, |a, b| b.n as f64 / a.n as f64))
}

/// Time study on a fixed fine grid.
pub fn time_study(spec: &HamiltonianSpec, base: &SolverConfig, n: usize, steps: &[usize], horizon: f64) -> mfg_congestion::Result<Study> {
    let mut levels = Vec::new();
    for &k in steps {
        levels.push(Level { n, steps: k, error: mms_error(spec, base, n, horizon, k)? });
    }
    Ok(study(levels, |a, b| b.steps as f64 / a.steps as f64))
}
