//! Experiment orchestration behind the command-line tool: trial fan-out,
//! result collection and CSV/JSON emission.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ao::{alternating_optimize, baseline_on_channels, scaling_fit, scaling_law_experiment, Scheme, Solution};
use crate::config::{ConfigError, RunConfig};
use crate::learning::{error_at_sinr, fit_error_model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Benchmark,
    Convergence,
    Scaling,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Benchmark => "benchmark",
            Command::Convergence => "convergence",
            Command::Scaling => "scaling",
            Command::Fit => "fit",
        }
    }
}

#[derive(Debug)]
pub enum HarnessError {
    /// Bad configuration or input file; exit status 2.
    Config(ConfigError),
    /// Solver failure or output problem; exit status 3.
    Internal(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "config error: {e}"),
            HarnessError::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

fn internal(e: impl fmt::Display) -> HarnessError {
    HarnessError::Internal(e.to_string())
}

/// Settings that shape the run but not the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Keep wall-clock times in results.json (makes it non-reproducible).
    pub timing: bool,
    /// Points file for `fit`, overriding the config's.
    pub points: Option<PathBuf>,
}

/// What a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Trials whose solver returned an error; recorded in results.json.
    pub failed_trials: usize,
    /// One-line human summary.
    pub message: String,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w =
            csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(internal)?;
        w.write_record(&self.header).map_err(internal)?;
        for r in &self.rows {
            w.write_record(r).map_err(internal)?;
        }
        w.flush().map_err(internal)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn task_columns(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

struct TrialResult {
    scheme: Scheme,
    antennas: usize,
    trial: usize,
    seed: u64,
    outcome: Result<Solution, String>,
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    Ok(builder.build().map_err(internal)?.install(f))
}

fn run_trials(
    cfg: &RunConfig,
    schemes: &[Scheme],
    antennas: &[usize],
    jobs: Option<usize>,
) -> Result<Vec<TrialResult>, HarnessError> {
    let mut work = Vec::new();
    for &n in antennas {
        for trial in 0..cfg.trials() {
            for &scheme in schemes {
                work.push((n, trial, scheme));
            }
        }
    }
    with_pool(jobs, || {
        work.par_iter()
            .map(|&(n, trial, scheme)| {
                let sc = cfg.scenario(trial, n);
                let outcome = match scheme {
                    Scheme::Proposed => alternating_optimize(&sc, &cfg.ao),
                    _ => sc.validate().and_then(|_| sc.channels()).and_then(|ch| {
                        baseline_on_channels(&ch, scheme, &sc.tasks, &sc.system, sc.seed, &cfg.ao).map(|mut s| {
                            s.seed = sc.seed;
                            s
                        })
                    }),
                };
                TrialResult { scheme, antennas: n, trial, seed: sc.seed, outcome: outcome.map_err(|e| e.to_string()) }
            })
            .collect()
    })
}

fn results_json(cmd: Command, cfg: &RunConfig, results: &[TrialResult], timing: bool) -> serde_json::Value {
    let trials: Vec<serde_json::Value> = results
        .iter()
        .map(|r| match &r.outcome {
            Ok(sol) => {
                let mut sol = sol.clone();
                if !timing {
                    sol.wall_time_s = None;
                }
                json!({"scheme": r.scheme, "antennas": r.antennas, "trial": r.trial, "seed": r.seed, "solution": sol})
            }
            Err(e) => json!({"scheme": r.scheme, "antennas": r.antennas, "trial": r.trial, "seed": r.seed, "error": e}),
        })
        .collect();
    json!({
        "command": cmd.name(),
        "name": cfg.file.name,
        "seed": cfg.file.experiment.seed,
        "system": cfg.system,
        "tasks": cfg.tasks,
        "solver": cfg.ao,
        "trials": trials,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
    text.push('\n');
    fs::write(path, text).map_err(internal)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summary_table(results: &[TrialResult], schemes: &[Scheme], antennas: &[usize]) -> Table {
    let mut t = Table::new([
        "scheme",
        "antennas",
        "trials",
        "failures",
        "mean_objective",
        "median_objective",
        "min_objective",
        "max_objective",
        "mean_sum_rate",
        "mean_ao_iters",
    ]);
    for &n in antennas {
        for &scheme in schemes {
            let group: Vec<&TrialResult> = results.iter().filter(|r| r.scheme == scheme && r.antennas == n).collect();
            let ok: Vec<&Solution> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let mut obj: Vec<f64> = ok.iter().map(|s| s.objective).collect();
            obj.sort_by(f64::total_cmp);
            let count = ok.len().max(1) as f64;
            t.push(vec![
                scheme.name().into(),
                n.to_string(),
                group.len().to_string(),
                (group.len() - ok.len()).to_string(),
                num(obj.iter().sum::<f64>() / count),
                num(median(&obj)),
                num(obj.first().copied().unwrap_or(f64::NAN)),
                num(obj.last().copied().unwrap_or(f64::NAN)),
                num(ok.iter().map(|s| s.sum_rate).sum::<f64>() / count),
                num(ok.iter().map(|s| (s.trace.len() - 1) as f64).sum::<f64>() / count),
            ]);
        }
    }
    t
}

fn trace_tables(results: &[TrialResult], k: usize, with_admm: bool) -> (Table, Table, Option<Table>) {
    let mut ao = Table::new(
        ["scheme", "antennas", "trial", "ao_iter", "objective"]
            .into_iter()
            .map(String::from)
            .chain(task_columns("per_task_error", k)),
    );
    let mut els = Table::new(["antennas", "trial", "ao_iter", "step", "delta", "feasible", "admm_iters"]);
    let mut admm = with_admm.then(|| {
        Table::new(
            ["antennas", "trial", "ao_iter", "els_step", "iter", "primal_residual", "feasible"]
                .into_iter()
                .map(String::from)
                .chain(task_columns("sinr", k)),
        )
    });
    for r in results {
        let Ok(sol) = &r.outcome else { continue };
        for rec in &sol.trace {
            let mut row = vec![
                r.scheme.name().into(),
                r.antennas.to_string(),
                r.trial.to_string(),
                rec.iter.to_string(),
                num(rec.objective),
            ];
            row.extend(rec.errors.iter().map(|&e| num(e)));
            ao.push(row);
        }
        for (ao_iter, steps) in sol.els_traces.iter().enumerate() {
            for (step, s) in steps.iter().enumerate() {
                els.push(vec![
                    r.antennas.to_string(),
                    r.trial.to_string(),
                    (ao_iter + 1).to_string(),
                    step.to_string(),
                    num(s.delta),
                    s.feasible.to_string(),
                    s.admm_iters.to_string(),
                ]);
                if let Some(t) = admm.as_mut() {
                    for rec in &s.admm_trace {
                        let mut row = vec![
                            r.antennas.to_string(),
                            r.trial.to_string(),
                            (ao_iter + 1).to_string(),
                            step.to_string(),
                            rec.iter.to_string(),
                            num(rec.primal_residual),
                            rec.feasible.to_string(),
                        ];
                        row.extend(rec.sinr.iter().map(|&x| num(x)));
                        t.push(row);
                    }
                }
            }
        }
    }
    (ao, els, admm)
}

/// Runs one experiment and writes its files under `opts.out`.
pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    fs::create_dir_all(&opts.out).map_err(|e| internal(format!("cannot create {}: {e}", opts.out.display())))?;
    match cmd {
        Command::Solve | Command::Convergence | Command::Benchmark => run_ao(cmd, cfg, opts),
        Command::Scaling => run_scaling(cfg, opts),
        Command::Fit => run_fit(cfg, opts),
    }
}

fn run_ao(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    let (schemes, antennas) = match cmd {
        Command::Benchmark => (
            cfg.file.experiment.schemes.clone(),
            cfg.file.experiment.antenna_sweep.clone().unwrap_or_else(|| vec![cfg.system.n]),
        ),
        _ => (vec![Scheme::Proposed], vec![cfg.system.n]),
    };
    let results = run_trials(cfg, &schemes, &antennas, opts.jobs)?;
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();

    let out = &opts.out;
    let mut files = Vec::new();
    let mut emit = |name: &str, table: &Table| -> Result<(), HarnessError> {
        let path = out.join(name);
        table.write(&path)?;
        files.push(path);
        Ok(())
    };
    let (ao, els, admm) = trace_tables(&results, cfg.system.k, cmd == Command::Convergence);
    emit("traces.csv", &ao)?;
    if cmd != Command::Benchmark {
        emit("els_trace.csv", &els)?;
    }
    if let Some(admm) = admm {
        emit("admm_trace.csv", &admm)?;
    }
    emit("summary.csv", &summary_table(&results, &schemes, &antennas))?;
    let path = out.join("results.json");
    write_json(&path, &results_json(cmd, cfg, &results, opts.timing))?;
    files.push(path);

    let best = results
        .iter()
        .filter(|r| r.scheme == Scheme::Proposed)
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|s| s.objective)
        .fold(f64::INFINITY, f64::min);
    let message = format!(
        "{}: {} runs ({} failed); best proposed max error {}",
        cmd.name(),
        results.len(),
        failed,
        if best.is_finite() { format!("{best:.6}") } else { "n/a".into() }
    );
    Ok(RunReport { files, failed_trials: failed, message })
}

fn run_scaling(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    let sc = &cfg.file.scaling;
    let params = cfg.scaling_params();
    let seed = cfg.file.experiment.seed;
    let points = with_pool(opts.jobs, || {
        sc.ris_sizes
            .par_iter()
            .map(|&m| scaling_law_experiment(&[m], sc.trials, &params, seed).map(|p| p[0]))
            .collect::<Result<Vec<_>, _>>()
    })?
    .map_err(internal)?;
    let task = cfg.scaling_task();
    let fit = scaling_fit(&points, &task, &cfg.system).map_err(internal)?;

    let mut table =
        Table::new(["ris_elements", "mean_snr", "predicted_snr", "relative_gap", "log2m_pow_neg_d", "error"]);
    for p in &points {
        table.push(vec![
            p.m.to_string(),
            num(p.mean_snr),
            num(p.predicted_snr),
            num(p.mean_snr / p.predicted_snr - 1.0),
            num((p.m as f64).log2().powf(-task.d)),
            num(error_at_sinr(p.mean_snr, &task, &cfg.system)),
        ]);
    }
    let summary = opts.out.join("summary.csv");
    table.write(&summary)?;
    let results = opts.out.join("results.json");
    write_json(
        &results,
        &json!({
            "command": "scaling",
            "name": cfg.file.name,
            "seed": seed,
            "params": params,
            "trials": sc.trials,
            "task": task,
            "points": points,
            "fit": fit,
        }),
    )?;
    Ok(RunReport {
        files: vec![summary, results],
        failed_trials: 0,
        message: format!("scaling: {} sizes, R^2 = {:.6} against (log2 M)^-{}", points.len(), fit.r_squared, task.d),
    })
}

/// Reads `sample_size,test_error` rows. A non-numeric first row is a header.
pub fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let at =
        |line: Option<usize>, message: String| ConfigError { path: path.to_path_buf(), line, column: None, message };
    let text = fs::read_to_string(path).map_err(|e| at(None, format!("cannot read points: {e}")))?;
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| at(Some(i + 1), e.to_string()))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if i == 0 && parsed.iter().any(Result::is_err) {
            continue;
        }
        match parsed.as_slice() {
            [Ok(v), Ok(e)] => points.push((*v, *e)),
            _ => {
                return Err(at(
                    Some(line),
                    format!(
                        "row {line}: expected two numbers `sample_size,test_error`, got {:?}",
                        rec.iter().collect::<Vec<_>>()
                    ),
                ))
            }
        }
    }
    Ok(points)
}

fn run_fit(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    let path = opts.points.clone().or_else(|| cfg.fit_points()).ok_or_else(|| ConfigError {
        path: cfg.path.clone(),
        line: None,
        column: None,
        message: "fit needs a points file: pass --points or set fit.points in the config".into(),
    })?;
    let points = read_points(&path)?;
    let (c, d) = fit_error_model(&points).map_err(|e| ConfigError {
        path: path.clone(),
        line: None,
        column: None,
        message: e.to_string(),
    })?;
    let summary = opts.out.join("summary.csv");
    let mut table = Table::new(["c", "d", "points"]);
    table.push(vec![num(c), num(d), points.len().to_string()]);
    table.write(&summary)?;
    let results = opts.out.join("results.json");
    write_json(&results, &json!({"command": "fit", "points_file": path, "points": points.len(), "c": c, "d": d}))?;
    Ok(RunReport { files: vec![summary, results], failed_trials: 0, message: format!("c = {c}, d = {d}") })
}
