use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;
mod refine;
mod scenario;

use commands::Status;
use config::Config;

#[derive(Parser)]
#[command(name = "mfg-congestion", about = "Congestion MFG and MFTC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML scenario file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `key=value` override with a dotted key, e.g. `grid.n=64`. Repeatable.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Solve the game system by damped Picard iteration.
    SolveMfg,
    /// Solve the control system.
    SolveMftc,
    /// Picard against the space-time Newton solve.
    Oracle,
    /// Report the structural hypotheses of the Hamiltonian.
    CheckHypotheses,
    /// Manufactured-solution refinement study of the HJB solve.
    RefineStudy,
    /// Game against control on the same data.
    Compare,
    /// Picard runs over the configured horizons.
    #[command(name = "sweep-T")]
    SweepT,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MFG_LOG", "warn")).init();
    let cli = Cli::parse();
    let mut config = match Config::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    let out = config.output.dir.clone();
    if let Err(e) = std::fs::create_dir_all(&out).and_then(|_| std::fs::write(out.join("config.toml"), config.to_toml())) {
        eprintln!("error: cannot write to {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::SolveMfg => commands::solve_mfg(&config, &out),
        Command::SolveMftc => commands::solve_mftc(&config, &out),
        Command::Oracle => commands::oracle(&config, &out),
        Command::CheckHypotheses => commands::check_hypotheses(&config, &out),
        Command::RefineStudy => commands::refine_study(&config, &out),
        Command::Compare => commands::compare(&config, &out),
        Command::SweepT => commands::sweep_t(&config, &out, cli.jobs.max(1)),
    };
    match result {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("solver did not converge; see {}", out.join("summary.toml").display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
