use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_edge::config::{Overrides, RunConfig};
use ris_edge::harness::{run, Command, HarnessError, RunOptions};

/// Min-max learning-error optimization for RIS-assisted edge learning.
#[derive(Debug, Parser)]
#[command(name = "ris-edge", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the alternating optimization on each trial.
    Solve(Common),
    /// Compare the optimizer against the no-RIS, random-phase and sum-rate schemes.
    Benchmark(Common),
    /// Like `solve`, additionally writing every ADMM iteration.
    Convergence(Common),
    /// Monte-Carlo mean SNR against RIS size, and the error fit.
    Scaling(Common),
    /// Fit `error = c v^-d` to measured (sample size, error) points.
    Fit {
        #[command(flatten)]
        common: Common,
        /// CSV of `sample_size,test_error` rows; overrides the config's.
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (JSON). Defaults to the reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// ADMM penalty.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "ao-tol")]
    ao_tol: Option<f64>,
    #[arg(long = "els-tol")]
    els_tol: Option<f64>,
    /// Record wall-clock times in results.json.
    #[arg(long)]
    timing: bool,
}

fn execute(cli: Cli) -> Result<String, HarnessError> {
    let (cmd, common, points) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c, None),
        Cmd::Benchmark(c) => (Command::Benchmark, c, None),
        Cmd::Convergence(c) => (Command::Convergence, c, None),
        Cmd::Scaling(c) => (Command::Scaling, c, None),
        Cmd::Fit { common, points } => (Command::Fit, common, points),
    };
    let overrides = Overrides {
        seed: common.seed,
        trials: common.trials,
        rho: common.rho,
        ao_tol: common.ao_tol,
        els_tol: common.els_tol,
    };
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::parse("{}", &PathBuf::from("<defaults>"), &overrides)?,
    };
    if common.jobs == Some(0) {
        return Err(HarnessError::Config(ris_edge::config::ConfigError {
            path: cfg.path.clone(),
            line: None,
            column: None,
            message: "--jobs must be at least 1".into(),
        }));
    }
    let opts = RunOptions { out: common.out, jobs: common.jobs, timing: common.timing, points };
    let report = run(cmd, &cfg, &opts)?;
    if report.failed_trials > 0 {
        return Err(HarnessError::Internal(format!(
            "{} trial(s) failed; details in {}",
            report.failed_trials,
            opts.out.join("results.json").display()
        )));
    }
    Ok(report.message)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
