use std::f64::consts::PI;

use mfg_congestion::mfg::{effective_data, newton_oracle_solve, pde_residuals, picard_solve, MFGSolution, NewtonOptions, PicardOptions};
use mfg_congestion::pde::{solve_fp_forward, solve_hjb_backward};
use mfg_congestion::{Boundary, Coupling, Grid, HamiltonianSpec, InitialDensity, ProblemData, SolverConfig, SpaceTimeField, TimeGrid};

fn canonical(n: usize) -> (HamiltonianSpec, ProblemData) {
    let grid = Grid::unit(1, n, Boundary::Neumann).unwrap();
    let data = ProblemData::from_kind(
        grid,
        Coupling::power(1.0, 1.0).unwrap(),
        Coupling::power(1.0, 1.0).unwrap(),
        &InitialDensity::Bump { amplitude: 0.5, phase: 0.0 },
    )
    .unwrap();
    (HamiltonianSpec::canonical(1.4, 0.5).unwrap(), data)
}

fn cfg(horizon: f64, steps: usize) -> SolverConfig {
    SolverConfig::new(TimeGrid::new(horizon, steps).unwrap())
}

#[test]
fn regularized_picard_matches_oracle_at_n64() {
    let (spec, data) = canonical(64);
    let spec = spec.with_eps(1e-3).unwrap();
    let config = cfg(0.1, 64);
    let (p, rep) = picard_solve(&spec, &data, &config, &PicardOptions { tol: 1e-11, ..PicardOptions::default() }).unwrap();
    assert!(rep.converged);
    let (o, _) = newton_oracle_solve(&spec, &data, &config, &NewtonOptions::default()).unwrap();
    assert!(p.u.sup_distance(&o.u).unwrap() <= 1e-6);
    assert!(p.m.sup_distance(&o.m).unwrap() <= 1e-6);
}

#[test]
fn one_more_step_is_a_fixed_point() {
    let (spec, data) = canonical(24);
    let config = cfg(0.1, 16);
    let tol = 1e-10;
    let (sol, rep) = picard_solve(&spec, &data, &config, &PicardOptions { tol, ..PicardOptions::default() }).unwrap();
    assert!(rep.converged);
    assert!(rep.residuals.hjb_sup <= 10.0 * tol && rep.residuals.fp_sup <= 10.0 * tol);
    let eff = effective_data(&spec, &data).unwrap();
    let u = solve_hjb_backward(&spec, &eff, &sol.m, &config).unwrap();
    let m = solve_fp_forward(&spec, &eff, &u, &config).unwrap();
    assert!(m.sup_distance(&sol.m).unwrap() <= tol);
}

#[test]
fn damping_invariance() {
    let (spec, data) = canonical(16);
    let config = cfg(0.1, 16);
    let mut sols = Vec::new();
    for damping in [0.25, 0.5, 1.0] {
        let (s, rep) = picard_solve(&spec, &data, &config, &PicardOptions { damping, tol: 1e-11, ..PicardOptions::default() }).unwrap();
        if rep.converged {
            sols.push(s);
        }
    }
    assert!(sols.len() >= 2);
    for s in &sols[1..] {
        assert!(s.m.sup_distance(&sols[0].m).unwrap() <= 1e-6);
        assert!(s.u.sup_distance(&sols[0].u).unwrap() <= 1e-6);
    }
}

#[test]
fn long_horizon_is_reported_not_raised() {
    let (spec, data) = canonical(32);
    let (_, rep) = picard_solve(&spec, &data, &cfg(5.0, 32), &PicardOptions { max_outer: 60, ..PicardOptions::default() }).unwrap();
    assert_eq!(rep.delta_m.len(), rep.iterations);
    if !rep.converged {
        assert_ne!(rep.diagnosis, mfg_congestion::mfg::Diagnosis::Converged);
    }
}

#[test]
fn uniqueness_fail_spec_still_solves() {
    let (_, data) = canonical(16);
    let spec = HamiltonianSpec::canonical(1.4, 1.5).unwrap();
    assert!(!spec.check_hypotheses(1, 500).uniqueness_pass());
    let (_, rep) = picard_solve(&spec, &data, &cfg(0.05, 16), &PicardOptions::default()).unwrap();
    assert!(rep.residuals.mass_err <= 1e-12);
}

/// Trigonometric interpolant through Neumann nodes `j / (N)` (cosine series).
fn cosine_interpolate(values: &[f64], fine: usize) -> Vec<f64> {
    let n = values.len() - 1;
    let coef: Vec<f64> = (0..=n)
        .map(|q| {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * v * (PI * (q * j) as f64 / n as f64).cos();
            }
            2.0 * s / n as f64
        })
        .collect();
    (0..fine)
        .map(|i| {
            let x = i as f64 / (fine - 1) as f64;
            let mut s = 0.0;
            for (q, c) in coef.iter().enumerate() {
                let w = if q == 0 || q == n { 0.5 } else { 1.0 };
                s += w * c * (PI * q as f64 * x).cos();
            }
            s
        })
        .collect()
}

fn refine(field: &SpaceTimeField, grid: Grid, time: TimeGrid) -> SpaceTimeField {
    let mut out = SpaceTimeField::scalar(grid, time);
    let coarse = field.time().steps();
    for k in 0..=time.steps() {
        let slice = if k % 2 == 0 {
            cosine_interpolate(field.at(k / 2), grid.n())
        } else {
            let a = cosine_interpolate(field.at(k / 2), grid.n());
            let b = cosine_interpolate(field.at((k / 2 + 1).min(coarse)), grid.n());
            a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
        };
        out.set(k, &slice);
    }
    out
}

#[test]
fn interpolated_residuals_decrease_under_refinement() {
    let interp = cosine_interpolate(&[1.0, 2.0, 0.5, 3.0, -1.0], 9);
    for (j, v) in [1.0, 2.0, 0.5, 3.0, -1.0].iter().enumerate() {
        assert!((interp[2 * j] - v).abs() < 1e-12);
    }
    for r in [1.4, 2.0] {
        let mut hjb = Vec::new();
        let mut fp = Vec::new();
        for (n, k) in [(17usize, 16usize), (33, 64), (65, 256)] {
            let (_, data) = canonical(n);
            let spec = HamiltonianSpec::canonical(r, 0.5).unwrap();
            let (sol, rep) = picard_solve(&spec, &data, &cfg(0.1, k), &PicardOptions { tol: 1e-12, ..PicardOptions::default() }).unwrap();
            assert!(rep.converged);
            let (_, fine_data) = canonical(2 * n - 1);
            let fine_cfg = cfg(0.1, 2 * k);
            let grid = *fine_data.grid();
            let u = refine(&sol.u, grid, fine_cfg.time);
            let m = refine(&sol.m, grid, fine_cfg.time);
            let drift = SpaceTimeField::vector(grid, fine_cfg.time);
            let fine = MFGSolution { u, m, drift, spec: spec.clone(), data: fine_data, config: fine_cfg, system: sol.system };
            let res = pde_residuals(&fine).unwrap();
            hjb.push(res.hjb_l2);
            fp.push(res.fp_l2);
        }
        let order = |v: &[f64]| v.windows(2).map(|w| (w[0] / w[1]).ln() / 4f64.ln()).fold(f64::INFINITY, f64::min);
        assert!(order(&hjb) >= 0.95, "r={r}: hjb residuals {hjb:?}");
        if r == 2.0 {
            assert!(order(&fp) >= 0.95, "r={r}: fp residuals {fp:?}");
        }
    }
}
