//! Subcommand bodies. Each writes its outputs under `out` and returns the run status.

use std::path::{Path, PathBuf};

use mfg_congestion::diagnostics::{energy_identity_residual, energy_terms};
use mfg_congestion::hamiltonian::hypotheses;
use mfg_congestion::mftc::{compare_mfg_mftc, mftc_solve, objective_j, ControlPair};
use mfg_congestion::{newton_oracle_solve, picard_solve, ConvergenceReport, MFGSolution};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::output::{num, write_fields, Summary};
use crate::refine;
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::NotConverged => "not-converged",
        }
    }

    fn from_flag(ok: bool) -> Self {
        if ok {
            Status::Success
        } else {
            Status::NotConverged
        }
    }

    fn and(self, other: Status) -> Status {
        Self::from_flag(self == Status::Success && other == Status::Success)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Setup(#[from] mfg_congestion::Error),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

pub type RunResult = Result<Status, RunError>;

#[derive(Serialize)]
struct Diagnostics {
    energy_identity_residual: Option<f64>,
    energy_terms: Option<mfg_congestion::EnergyTerms>,
    mass_error: f64,
    hjb_residual_sup: f64,
    fp_residual_sup: f64,
    errors: Vec<String>,
}

fn diagnostics(sol: &MFGSolution, report: &ConvergenceReport) -> Diagnostics {
    let mut errors = Vec::new();
    let energy_identity_residual = energy_identity_residual(sol).map_err(|e| errors.push(e.to_string())).ok();
    let energy_terms = energy_terms(sol).map_err(|e| errors.push(e.to_string())).ok();
    Diagnostics {
        energy_identity_residual,
        energy_terms,
        mass_error: report.residuals.mass_err,
        hjb_residual_sup: report.residuals.hjb_sup,
        fp_residual_sup: report.residuals.fp_sup,
        errors,
    }
}

fn base_summary(command: &str, config: &Config) -> Summary {
    let mut s = Summary::new(command, "running");
    s.section("config", config);
    s
}

fn finish(mut summary: Summary, out: &Path, status: Status) -> RunResult {
    summary.set_status(status.label());
    summary.write(out)?;
    Ok(status)
}

/// Records a solver error and reports non-convergence.
fn failed(mut summary: Summary, out: &Path, err: mfg_congestion::Error) -> RunResult {
    log::error!("{err}");
    summary.text("error", err.to_string());
    finish(summary, out, Status::NotConverged)
}

fn hypothesis_section(summary: &mut Summary, sc: &Scenario, samples: usize) -> String {
    let report = sc.spec.check_hypotheses(sc.grid.dim(), samples);
    summary.section("hypotheses", &report);
    let text = report.to_text();
    summary.text("hypotheses_text", text.clone());
    text
}

pub fn solve_mfg(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("solve-mfg", config);
    hypothesis_section(&mut summary, &sc, config.hypotheses.samples);
    let (sol, report) = match picard_solve(&sc.spec, &sc.data, &sc.solver, &sc.picard) {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    write_fields(out, &sol)?;
    summary.section("convergence", &report);
    summary.section("diagnostics", &diagnostics(&sol, &report));
    finish(summary, out, Status::from_flag(report.converged))
}

#[derive(Serialize)]
struct Objective {
    j: f64,
}

pub fn solve_mftc(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("solve-mftc", config);
    let (sol, report) = match mftc_solve(&sc.spec, &sc.data, &sc.solver, &sc.picard) {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    write_fields(out, &sol)?;
    summary.section("convergence", &report);
    match objective_j(&ControlPair::from_solution(&sol), &sol.spec, &sol.data) {
        Ok(j) => summary.section("objective", &Objective { j }),
        Err(e) => summary.text("objective_error", e.to_string()),
    }
    finish(summary, out, Status::from_flag(report.converged))
}

#[derive(Serialize)]
struct OracleSummary {
    u_sup_distance: f64,
    m_sup_distance: f64,
    newton_iterations: usize,
    newton_residuals: Vec<f64>,
    newton_unknowns: usize,
}

pub fn oracle(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("oracle", config);
    let (picard, report) = match picard_solve(&sc.spec, &sc.data, &sc.solver, &sc.picard) {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    write_fields(&out.join("picard"), &picard)?;
    summary.section("convergence", &report);
    let (newton, nrep) = match newton_oracle_solve(&sc.spec, &sc.data, &sc.solver, &sc.newton) {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    write_fields(&out.join("newton"), &newton)?;
    summary.section(
        "oracle",
        &OracleSummary {
            u_sup_distance: picard.u.sup_distance(&newton.u)?,
            m_sup_distance: picard.m.sup_distance(&newton.m)?,
            newton_iterations: nrep.iterations,
            newton_residuals: nrep.residual_history,
            newton_unknowns: nrep.unknowns,
        },
    );
    finish(summary, out, Status::from_flag(report.converged))
}

#[derive(Serialize)]
struct Thresholds {
    growth_rate_bound: f64,
    growth_rate_holds: bool,
    canonical_alpha_bound: f64,
    canonical_uniqueness_holds: Option<bool>,
}

pub fn check_hypotheses(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("check-hypotheses", config);
    let (r, d) = (sc.spec.r(), sc.grid.dim());
    summary.section(
        "thresholds",
        &Thresholds {
            growth_rate_bound: (d as f64 + 2.0) / (d as f64 + 1.0),
            growth_rate_holds: hypotheses::growth_rate_holds(r, d),
            canonical_alpha_bound: 4.0 * (r - 1.0) / r,
            canonical_uniqueness_holds: sc.spec.alpha().map(|a| hypotheses::canonical_uniqueness_holds(r, a)),
        },
    );
    print!("{}", hypothesis_section(&mut summary, &sc, config.hypotheses.samples));
    finish(summary, out, Status::Success)
}

pub fn refine_study(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("refine-study", config);
    let sw = &config.sweep;
    let horizon = sw.refine_horizon;
    let studies = refine::space_study(&sc.spec, &sc.solver, &sw.grid_sizes, sw.steps_per_n2, horizon)
        .and_then(|s| Ok((s, refine::time_study(&sc.spec, &sc.solver, sw.time_study_n, &sw.time_steps, horizon)?)));
    let (space, time) = match studies {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    let mut csv = String::from("study,n,steps,error\n");
    for (name, s) in [("space", &space), ("time", &time)] {
        for l in &s.levels {
            csv.push_str(&format!("{name},{},{},{}\n", l.n, l.steps, num(l.error)));
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("refine.csv"), csv)?;
    summary.section("space_study", &space);
    summary.section("time_study", &time);
    println!("space orders {:?}, time orders {:?}", space.orders, time.orders);
    finish(summary, out, Status::Success)
}

pub fn compare(config: &Config, out: &Path) -> RunResult {
    let sc = Scenario::build(config)?;
    let mut summary = base_summary("compare", config);
    let (cmp, game, control) = match compare_mfg_mftc(&sc.spec, &sc.data, &sc.solver, &sc.picard) {
        Ok(v) => v,
        Err(e) => return failed(summary, out, e),
    };
    write_fields(&out.join("mfg"), &game)?;
    write_fields(&out.join("mftc"), &control)?;
    let csv = format!(
        "quantity,value\nj_mfg,{}\nj_mftc,{}\nu_sup_distance,{}\nm_sup_distance,{}\n",
        num(cmp.j_mfg),
        num(cmp.j_mftc),
        num(cmp.du_sup),
        num(cmp.dm_sup)
    );
    std::fs::write(out.join("comparison.csv"), csv)?;
    summary.section("comparison", &cmp);
    finish(summary, out, Status::from_flag(cmp.mfg_converged && cmp.mftc_converged))
}

#[derive(Clone, Debug, Serialize)]
struct SweepRun {
    horizon: f64,
    dir: PathBuf,
    iterations: usize,
    converged: bool,
    diagnosis: String,
    error: Option<String>,
}

fn sweep_one(config: &Config, base: &Scenario, index: usize, horizon: f64, out: &Path) -> Result<SweepRun, RunError> {
    let dir = PathBuf::from(format!("run-{index:02}"));
    let run_out = out.join(&dir);
    let mut run_config = config.clone();
    run_config.time.horizon = horizon;
    run_config.output.dir = run_out.clone();
    let sc = base.with_horizon(config, horizon)?;
    let mut summary = base_summary("solve-mfg", &run_config);
    let (iterations, converged, diagnosis, error) = match picard_solve(&sc.spec, &sc.data, &sc.solver, &sc.picard) {
        Ok((sol, report)) => {
            write_fields(&run_out, &sol)?;
            summary.section("convergence", &report);
            summary.section("diagnostics", &diagnostics(&sol, &report));
            let diagnosis = toml::Value::try_from(report.diagnosis).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default();
            (report.iterations, report.converged, diagnosis, None)
        }
        Err(e) => {
            summary.text("error", e.to_string());
            (0, false, "error".to_string(), Some(e.to_string()))
        }
    };
    finish(summary, &run_out, Status::from_flag(converged))?;
    log::info!("T = {horizon}: {iterations} iterations, converged {converged}");
    Ok(SweepRun { horizon, dir, iterations, converged, diagnosis, error })
}

#[derive(Serialize)]
struct SweepSummary {
    runs: Vec<SweepRun>,
}

pub fn sweep_t(config: &Config, out: &Path, jobs: usize) -> RunResult {
    let base = Scenario::build(config)?;
    let mut summary = base_summary("sweep-T", config);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(std::io::Error::other)?;
    let runs: Vec<_> = pool.install(|| {
        config.sweep.horizons.par_iter().enumerate().map(|(i, &t)| sweep_one(config, &base, i, t, out)).collect::<Result<Vec<_>, _>>()
    })?;
    let status = runs.iter().fold(Status::Success, |s, r| s.and(Status::from_flag(r.converged)));
    summary.section("sweep", &SweepSummary { runs });
    finish(summary, out, status)
}
