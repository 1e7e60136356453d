//! Acceptance suite: one PASS/FAIL line per criterion, pinned tolerances.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfg_congestion::diagnostics::{energy_identity_residual, energy_terms, uniqueness_gap};
use mfg_congestion::hamiltonian::hypotheses::{canonical_uniqueness_holds, growth_rate_holds};
use mfg_congestion::hamiltonian::{hypotheses, Congestion};
use mfg_congestion::mfg::{newton_oracle_solve, picard_solve, InitialGuess, MFGSolution, NewtonOptions, PicardOptions};
use mfg_congestion::mftc::{
    adjoint_solve, compare_mfg_mftc, feasibility_residual, feasible_density, gateaux_derivative, gateaux_with_adjoint,
    mftc_solve, objective_j, random_momentum, tangent_direction, ControlPair,
};
use mfg_congestion::operators::{divergence_adjoint, gradient, inner, integrate, laplacian};
use mfg_congestion::pde::{solve_fp_forward, solve_hjb_backward};
use mfg_congestion::{Boundary, Coupling, Grid, HamiltonianSpec, InitialDensity, ProblemData, SolverConfig, SpaceTimeField, TimeGrid};

const ADJOINT_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-12;
const MASS_RUNTIME: Duration = Duration::from_secs(10);
const DERIVATIVE_REL_TOL: f64 = 1e-5;
const FENCHEL_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_RUNTIME: Duration = Duration::from_secs(60);
const UNIQUENESS_TOL: f64 = 1e-6;
const GAP_FLOOR: f64 = -1e-8;
const GRADIENT_SEPARATION: f64 = 1e-3;
const ENERGY_ORDER: f64 = 1.0;
const ENERGY_EXACT_TOL: f64 = 1e-12;
const TERM_FLOOR: f64 = -1e-10;
const GATEAUX_REL_TOL: f64 = 1e-5;
const GATEAUX_STEP: f64 = 1e-5;
const OPTIMALITY_TOL: f64 = 1e-6;
const COLLAPSE_TOL: f64 = 1e-8;
const SHORT_TIME_TOL: f64 = 1e-8;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn canonical_data(grid: Grid) -> ProblemData {
    ProblemData::from_kind(
        grid,
        Coupling::power(1.0, 1.0).unwrap(),
        Coupling::power(1.0, 1.0).unwrap(),
        &InitialDensity::Bump { amplitude: 0.5, phase: 0.0 },
    )
    .unwrap()
}

fn canonical_spec() -> HamiltonianSpec {
    HamiltonianSpec::canonical(1.4, 0.5).unwrap()
}

fn config(horizon: f64, steps: usize) -> SolverConfig {
    SolverConfig::new(TimeGrid::new(horizon, steps).unwrap())
}

fn tight() -> PicardOptions {
    PicardOptions { tol: 1e-12, ..PicardOptions::default() }
}

fn random_field(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_pair = 0.0_f64;
    for (dim, n) in [(1, 64), (2, 24)] {
        for boundary in [Boundary::Periodic, Boundary::Neumann] {
            let grid = Grid::unit(dim, n, boundary).unwrap();
            for _ in 0..20 {
                let u = random_field(&mut rng, grid.len());
                let v = random_field(&mut rng, grid.len() * dim);
                let w = random_field(&mut rng, grid.len());
                let g = gradient(&u, &grid).unwrap();
                let d = divergence_adjoint(&v, &grid).unwrap();
                worst_pair = worst_pair.max((inner(&g, &v, &grid) + inner(&u, &d, &grid)).abs());
                let lu = laplacian(&u, &grid).unwrap();
                let lw = laplacian(&w, &grid).unwrap();
                worst_pair = worst_pair.max((inner(&lu, &w, &grid) - inner(&u, &lw, &grid)).abs());
            }
        }
    }
    check(worst_pair <= ADJOINT_TOL, format!("pairing defect {worst_pair:.3e}"))?;
    let mut worst_mass = 0.0_f64;
    let spec = canonical_spec();
    let cfg = config(0.1, 64);
    for boundary in [Boundary::Periodic, Boundary::Neumann] {
        let data = canonical_data(Grid::unit(1, 64, boundary).unwrap());
        let frozen = SpaceTimeField::constant_in_time(*data.grid(), cfg.time, 1, data.m0()).unwrap();
        let u = solve_hjb_backward(&spec, &data, &frozen, &cfg).unwrap();
        let mut fields = vec![solve_fp_forward(&spec, &data, &u, &cfg).unwrap()];
        let (sol, _) = picard_solve(&spec, &data, &cfg, &PicardOptions::default()).unwrap();
        fields.push(sol.m);
        for m in &fields {
            for k in 0..=cfg.time.steps() {
                worst_mass = worst_mass.max((integrate(m.at(k), data.grid()) - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst_mass <= MASS_TOL, format!("mass error {worst_mass:.3e}"))?;
    check(elapsed < MASS_RUNTIME, format!("runtime {elapsed:?}"))?;
    Ok(format!("pairing defect {worst_pair:.2e}, mass error {worst_mass:.2e}, {:.2}s", elapsed.as_secs_f64()))
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

fn vec_scale(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn criterion_2() -> Outcome {
    let specs = [
        ("canonical r=1.4", HamiltonianSpec::canonical(1.4, 0.5).unwrap()),
        ("canonical r=1.2", HamiltonianSpec::canonical(1.2, 0.3).unwrap()),
        ("saturating r=1.3", HamiltonianSpec::general(1.3, Congestion::saturating(2.0, 0.7), 0.7, 4.0).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    let mut worst_fenchel = 0.0_f64;
    let x = [0.3, 0.6];
    for (name, spec) in &specs {
        for dim in [1usize, 2] {
            for _ in 0..100 {
                let m = 10f64.powf(rng.gen_range(-1.0..1.0));
                let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
                let t = 0.0;
                let hm = 1e-5 * m;
                let grad = spec.grad_p_h(t, &x[..dim], m, &p).unwrap();
                let hess = spec.hess_p_h(t, &x[..dim], m, &p).unwrap();
                for a in 0..dim {
                    let hp = 1e-5 * vec_scale(&p);
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp[a] += hp;
                    pm[a] -= hp;
                    let fd = (spec.eval_h(t, &x[..dim], m, &pp).unwrap() - spec.eval_h(t, &x[..dim], m, &pm).unwrap()) / (2.0 * hp);
                    worst = worst.max(rel_err(grad[a], fd, vec_scale(&grad)));
                    let gp = spec.grad_p_h(t, &x[..dim], m, &pp).unwrap();
                    let gm = spec.grad_p_h(t, &x[..dim], m, &pm).unwrap();
                    let hscale = vec_scale(&hess);
                    for b in 0..dim {
                        worst = worst.max(rel_err(hess[b * dim + a], (gp[b] - gm[b]) / (2.0 * hp), hscale));
                    }
                }
                let dm = spec.dm_h(t, &x[..dim], m, &p).unwrap();
                let fd = (spec.eval_h(t, &x[..dim], m + hm, &p).unwrap() - spec.eval_h(t, &x[..dim], m - hm, &p).unwrap()) / (2.0 * hm);
                worst = worst.max(rel_err(dm, fd, dm.abs()));
                let dmg = spec.dm_grad_p_h(t, &x[..dim], m, &p).unwrap();
                let gp = spec.grad_p_h(t, &x[..dim], m + hm, &p).unwrap();
                let gm = spec.grad_p_h(t, &x[..dim], m - hm, &p).unwrap();
                for a in 0..dim {
                    worst = worst.max(rel_err(dmg[a], (gp[a] - gm[a]) / (2.0 * hm), vec_scale(&dmg)));
                }
                let w: Vec<f64> = grad.iter().map(|g| -m * g).collect();
                let dl = spec.dm_tilde_l(t, &x[..dim], m, &w).unwrap();
                let fd = (spec.tilde_l(t, &x[..dim], m + hm, &w).unwrap() - spec.tilde_l(t, &x[..dim], m - hm, &w).unwrap()) / (2.0 * hm);
                worst = worst.max(rel_err(dl, fd, dl.abs()));
                let pw: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
                let h = spec.eval_h(t, &x[..dim], m, &p).unwrap();
                let l = spec.tilde_l(t, &x[..dim], m, &w).unwrap();
                worst_fenchel = worst_fenchel.max((l + m * h + pw).abs() / (1.0 + (m * h).abs()));
            }
            check(worst <= DERIVATIVE_REL_TOL, format!("{name}, d={dim}: derivative relative error {worst:.3e}"))?;
            check(worst_fenchel <= FENCHEL_TOL, format!("{name}, d={dim}: Fenchel defect {worst_fenchel:.3e}"))?;
        }
    }
    Ok(format!("max derivative relative error {worst:.2e}, Fenchel defect {worst_fenchel:.2e}"))
}

fn criterion_3() -> Outcome {
    let boundary_d1 = 1.5;
    check(growth_rate_holds(boundary_d1 - 1e-12, 1), "r just below 3/2 should pass in d=1".into())?;
    check(!growth_rate_holds(boundary_d1, 1), "r = 3/2 must fail in d=1".into())?;
    check(growth_rate_holds(4.0 / 3.0 - 1e-12, 2) && !growth_rate_holds(4.0 / 3.0, 2), "d=2 threshold 4/3".into())?;
    let alpha_max = 8.0 / 7.0;
    check(canonical_uniqueness_holds(1.4, alpha_max - 1e-12), "alpha just below 8/7 should pass".into())?;
    check(!canonical_uniqueness_holds(1.4, alpha_max), "alpha = 8/7 must fail".into())?;
    let pass = HamiltonianSpec::canonical(1.4, 1.0).unwrap().check_hypotheses(1, 2000);
    check(pass.all_pass(), format!("canonical r=1.4 alpha=1 report:\n{}", pass.to_text()))?;
    let fail = HamiltonianSpec::canonical(1.4, 1.2).unwrap().check_hypotheses(1, 2000);
    check(!fail.passed(hypotheses::UNIQUENESS_FORM), "alpha=1.2 should fail the uniqueness form".into())?;
    let fast = HamiltonianSpec::canonical(1.6, 0.5).unwrap().check_hypotheses(1, 500);
    check(!fast.passed(hypotheses::GROWTH_RATE), "r=1.6 should fail the growth rate in d=1".into())?;
    Ok("d=1 growth boundary 1.5, r=1.4 uniqueness boundary 8/7".into())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let data = canonical_data(Grid::unit(1, 16, Boundary::Neumann).unwrap());
    let cfg = config(0.1, 16);
    let (p, rep) = picard_solve(&canonical_spec(), &data, &cfg, &tight()).map_err(|e| e.to_string())?;
    check(rep.converged, format!("Picard did not converge: {:?}", rep.diagnosis))?;
    let (o, orep) = newton_oracle_solve(&canonical_spec(), &data, &cfg, &NewtonOptions::default()).map_err(|e| e.to_string())?;
    let du = p.u.sup_distance(&o.u).unwrap();
    let dm = p.m.sup_distance(&o.m).unwrap();
    let elapsed = start.elapsed();
    check(du <= ORACLE_TOL && dm <= ORACLE_TOL, format!("sup distance u {du:.3e}, m {dm:.3e}"))?;
    check(elapsed < ORACLE_RUNTIME, format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "u {du:.2e}, m {dm:.2e} (Picard {} its, Newton {} its), {:.2}s",
        rep.iterations,
        orep.iterations,
        elapsed.as_secs_f64()
    ))
}

fn perturbed_pair(sol: &MFGSolution, delta: f64, mode: f64) -> MFGSolution {
    let grid = *sol.u.grid();
    let bump = grid.sample(|x| (std::f64::consts::PI * mode * x[0]).cos());
    let mut u = sol.u.clone();
    for k in 0..=u.time().steps() {
        for (v, b) in u.at_mut(k).iter_mut().zip(&bump) {
            *v += delta * b;
        }
    }
    let m = solve_fp_forward(&sol.spec, &sol.data, &u, &sol.config).unwrap();
    MFGSolution { u, m, ..sol.clone() }
}

fn criterion_5() -> Outcome {
    let spec = canonical_spec();
    check(spec.check_hypotheses(1, 2000).uniqueness_pass(), "spec must pass the uniqueness gate".into())?;
    let data = canonical_data(Grid::unit(1, 16, Boundary::Neumann).unwrap());
    let cfg = config(0.1, 16);
    let (a, ra) = picard_solve(&spec, &data, &cfg, &tight()).map_err(|e| e.to_string())?;
    let uniform = SpaceTimeField::constant_in_time(*data.grid(), cfg.time, 1, &vec![1.0; 16]).unwrap();
    let opts = PicardOptions { initial: InitialGuess::Density(uniform.clone()), ..tight() };
    let (b, rb) = picard_solve(&spec, &data, &cfg, &opts).map_err(|e| e.to_string())?;
    check(ra.converged && rb.converged, "Picard runs did not converge".into())?;
    let (c, _) = newton_oracle_solve(&spec, &data, &cfg, &NewtonOptions { initial: InitialGuess::Density(uniform), ..NewtonOptions::default() })
        .map_err(|e| e.to_string())?;
    let (d, _) = newton_oracle_solve(&spec, &data, &cfg, &NewtonOptions::default()).map_err(|e| e.to_string())?;
    let mut spread = 0.0_f64;
    for s in [&b, &c, &d] {
        spread = spread.max(a.u.sup_distance(&s.u).unwrap()).max(a.m.sup_distance(&s.m).unwrap());
    }
    check(spread <= UNIQUENESS_TOL, format!("solutions from distinct guesses differ by {spread:.3e}"))?;
    let self_gap = uniqueness_gap(&a, &a).map_err(|e| e.to_string())?;
    check(self_gap == 0.0, format!("gap(sol, sol) = {self_gap:e}"))?;
    let mut min_gap = f64::INFINITY;
    for (delta, mode) in [(1e-3, 1.0), (5e-3, 2.0), (2e-2, 1.0), (1e-2, 3.0)] {
        let q = perturbed_pair(&a, delta, mode);
        let dg = (0..=cfg.time.steps())
            .map(|k| {
                let g1 = gradient(a.u.at(k), data.grid()).unwrap();
                let g2 = gradient(q.u.at(k), data.grid()).unwrap();
                g1.iter().zip(&g2).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
            })
            .fold(0.0_f64, f64::max);
        let gap = uniqueness_gap(&q, &a).map_err(|e| e.to_string())?;
        let swapped = uniqueness_gap(&a, &q).map_err(|e| e.to_string())?;
        check(gap >= GAP_FLOOR, format!("gap {gap:e} below floor"))?;
        check((gap - swapped).abs() <= 1e-12 * (1.0 + gap.abs()), format!("gap not symmetric: {gap:e} vs {swapped:e}"))?;
        if dg >= GRADIENT_SEPARATION {
            check(gap > 0.0, format!("gap {gap:e} not positive for gradient separation {dg:.2e}"))?;
        }
        min_gap = min_gap.min(gap);
    }
    Ok(format!("spread {spread:.2e}, smallest perturbed gap {min_gap:.2e}"))
}

fn criterion_6() -> Outcome {
    let spec = canonical_spec();
    let mut residuals = Vec::new();
    for (n, k) in [(9usize, 4usize), (17, 16), (33, 64)] {
        let data = canonical_data(Grid::unit(1, n, Boundary::Neumann).unwrap());
        let (sol, rep) = picard_solve(&spec, &data, &config(0.1, k), &tight()).map_err(|e| e.to_string())?;
        check(rep.converged, format!("n={n} did not converge"))?;
        residuals.push(energy_identity_residual(&sol).map_err(|e| e.to_string())?.abs());
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).ln() / 4f64.ln()).collect();
    check(orders.iter().all(|o| *o >= ENERGY_ORDER), format!("residuals {residuals:?}, orders {orders:.3?}"))?;
    let grid = Grid::unit(1, 16, Boundary::Neumann).unwrap();
    let mut exact = 0.0_f64;
    for c in [0.0, 2.5] {
        let data = ProblemData::from_kind(grid, Coupling::zero(), Coupling::constant(c), &InitialDensity::Uniform).unwrap();
        let (sol, _) = picard_solve(&HamiltonianSpec::canonical(1.4, 0.5).unwrap(), &data, &config(0.1, 8), &tight()).map_err(|e| e.to_string())?;
        exact = exact.max(energy_identity_residual(&sol).map_err(|e| e.to_string())?.abs());
    }
    check(exact <= ENERGY_EXACT_TOL, format!("constant scenario residual {exact:.3e}"))?;
    Ok(format!("residuals {residuals:?}, orders {orders:.2?}, constant scenario {exact:.1e}"))
}

fn criterion_7() -> Outcome {
    let mut runs = Vec::new();
    for boundary in [Boundary::Neumann, Boundary::Periodic] {
        let data = canonical_data(Grid::unit(1, 16, boundary).unwrap());
        runs.push((format!("{boundary:?} canonical"), canonical_spec(), data, config(0.1, 16)));
    }
    let g2 = Grid::unit(2, 10, Boundary::Neumann).unwrap();
    runs.push(("2d Neumann".into(), HamiltonianSpec::canonical(1.3, 0.4).unwrap(), canonical_data(g2), config(0.05, 8)));
    let sq = ProblemData::from_kind(
        Grid::unit(1, 16, Boundary::Neumann).unwrap(),
        Coupling::power(0.5, 2.0).unwrap(),
        Coupling::power(2.0, 0.5).unwrap(),
        &InitialDensity::Bump { amplitude: 0.8, phase: 0.0 },
    )
    .unwrap();
    runs.push(("regularized".into(), canonical_spec().with_eps(1e-3).unwrap(), sq, config(0.1, 16)));
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for (name, spec, data, cfg) in runs {
        let (sol, rep) = picard_solve(&spec, &data, &cfg, &PicardOptions::default()).map_err(|e| e.to_string())?;
        if !rep.converged {
            continue;
        }
        count += 1;
        let terms = energy_terms(&sol).map_err(|e| e.to_string())?;
        check(terms.min_term() >= TERM_FLOOR, format!("{name}: {terms:?}"))?;
        check(terms.audit_pass, format!("{name}: audit failed {terms:?}"))?;
        worst = worst.min(terms.min_term());
    }
    check(count >= 3, format!("only {count} runs converged"))?;
    Ok(format!("{count} converged runs, smallest term {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let grid = Grid::unit(1, 16, Boundary::Neumann).unwrap();
    let data = canonical_data(grid);
    let cfg = config(0.1, 16);
    let spec = canonical_spec();
    let time = cfg.time;
    let w = random_momentum(grid, time, 0.2, 99);
    let pair = ControlPair::new(feasible_density(&w, data.m0()).map_err(|e| e.to_string())?, w).unwrap();
    check(feasibility_residual(&pair, &data).unwrap() <= 1e-10, "random pair infeasible".into())?;
    let mut worst_fd = 0.0_f64;
    for seed in 0..5 {
        let dir = tangent_direction(random_momentum(grid, time, 1.0, 10 + seed)).map_err(|e| e.to_string())?;
        let g = gateaux_derivative(&pair, &dir, &spec, &data).map_err(|e| e.to_string())?;
        let jp = objective_j(&pair.offset(&dir, GATEAUX_STEP).unwrap(), &spec, &data).map_err(|e| e.to_string())?;
        let jm = objective_j(&pair.offset(&dir, -GATEAUX_STEP).unwrap(), &spec, &data).map_err(|e| e.to_string())?;
        let fd = (jp - jm) / (2.0 * GATEAUX_STEP);
        worst_fd = worst_fd.max((g - fd).abs() / g.abs());
    }
    check(worst_fd <= GATEAUX_REL_TOL, format!("Gateaux vs central difference {worst_fd:.3e}"))?;
    let (cmp, _, control) = compare_mfg_mftc(&spec, &data, &cfg, &tight()).map_err(|e| e.to_string())?;
    check(cmp.mfg_converged && cmp.mftc_converged, format!("comparison runs did not converge: {cmp:?}"))?;
    let opt = ControlPair::from_solution(&control);
    let u = adjoint_solve(&opt, &spec, &data).map_err(|e| e.to_string())?;
    let mut worst_opt = 0.0_f64;
    for seed in 0..10 {
        let dir = tangent_direction(random_momentum(grid, time, 1.0, 100 + seed)).map_err(|e| e.to_string())?;
        worst_opt = worst_opt.max(gateaux_with_adjoint(&opt, &u, &dir, &spec).map_err(|e| e.to_string())?.abs());
    }
    check(worst_opt <= OPTIMALITY_TOL, format!("derivative at optimum {worst_opt:.3e}"))?;
    check(cmp.j_mftc <= cmp.j_mfg, format!("J(MFTC) {} > J(MFG) {}", cmp.j_mftc, cmp.j_mfg))?;
    let flat = HamiltonianSpec::canonical(1.4, 0.0).unwrap();
    let (c0, _, _) = compare_mfg_mftc(&flat, &data, &cfg, &tight()).map_err(|e| e.to_string())?;
    check(c0.du_sup <= COLLAPSE_TOL && c0.dm_sup <= COLLAPSE_TOL, format!("alpha=0 collapse {c0:?}"))?;
    let (_, rep) = mftc_solve(&spec, &data, &cfg, &tight()).map_err(|e| e.to_string())?;
    check(rep.converged, "mftc_solve did not converge".into())?;
    Ok(format!(
        "FD rel {worst_fd:.2e}, optimum derivative {worst_opt:.2e}, J {:.10} <= {:.10}, alpha=0 distance {:.1e}",
        cmp.j_mftc,
        cmp.j_mfg,
        c0.du_sup.max(c0.dm_sup)
    ))
}

fn criterion_9() -> Outcome {
    let data = canonical_data(Grid::unit(1, 64, Boundary::Neumann).unwrap());
    let spec = canonical_spec().with_eps(1e-3).unwrap();
    let opts = PicardOptions { tol: SHORT_TIME_TOL, ..PicardOptions::default() };
    let mut counts = Vec::new();
    let mut flags = Vec::new();
    for horizon in [0.4, 0.2, 0.1, 0.05] {
        let (_, rep) = picard_solve(&spec, &data, &config(horizon, 64), &opts).map_err(|e| e.to_string())?;
        counts.push(rep.iterations);
        flags.push(rep.converged);
    }
    check(counts.windows(2).all(|w| w[1] <= w[0]), format!("iteration counts {counts:?} (converged {flags:?})"))?;
    check(flags[1..].iter().all(|f| *f), format!("short horizons must converge: {flags:?}"))?;
    let long = picard_solve(&spec, &data, &config(5.0, 64), &opts);
    let (_, rep) = long.map_err(|e| format!("T=5 run raised {e}"))?;
    check(rep.converged || rep.diagnosis != mfg_congestion::mfg::Diagnosis::Converged, "inconsistent long-horizon report".into())?;
    check(rep.delta_m.len() == rep.iterations && rep.delta_m.iter().all(|d| *d >= 0.0), "malformed long-horizon history".into())?;
    Ok(format!(
        "counts for T=0.4,0.2,0.1,0.05: {counts:?} (converged {flags:?}); T=5: converged {}, diagnosis {:?}, {} iterations",
        rep.converged, rep.diagnosis, rep.iterations
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("operator adjointness and mass conservation", criterion_1),
        ("Hamiltonian calculus", criterion_2),
        ("hypothesis gate thresholds", criterion_3),
        ("Picard vs space-time Newton", criterion_4),
        ("uniqueness experiment", criterion_5),
        ("energy identity", criterion_6),
        ("energy-term signs", criterion_7),
        ("mean field type control", criterion_8),
        ("short-time behavior", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} [{secs:.2}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{secs:.2}s] {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
