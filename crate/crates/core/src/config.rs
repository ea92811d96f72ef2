//! Experiment configuration files.
//!
//! Configs are JSON with units spelled out in key names. Every section and
//! field is optional; omitted values take the reference setup (K = 4 tasks,
//! N = 10, M = 50, B = 5 MHz, T = 10 s, noise -77 dBm). Unknown keys are
//! rejected so typos surface as errors rather than silent defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao::{AoOptions, ScalingParams, Scenario, Scheme};
use crate::channel::{derive_seed, users_in_disc, Geometry};
use crate::learning::{dbm_to_watts, SampleCountMode, SystemConfig, TaskProfile, DEFAULT_POWER_WATTS};
use crate::phase_opt::{AdmmOptions, ElsOptions, StopRule, WarmStart};

/// A config problem, located in the source text where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub bandwidth_hz: f64,
    pub time_s: f64,
    pub noise_dbm: f64,
    pub antennas: usize,
    pub ris_elements: usize,
    pub users: usize,
    pub sample_mode: SampleCountMode,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            bandwidth_hz: 5e6,
            time_s: 10.0,
            noise_dbm: -77.0,
            antennas: 10,
            ris_elements: 50,
            users: 4,
            sample_mode: SampleCountMode::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub bs_m: [f64; 2],
    pub ris_m: [f64; 2],
    /// Users are drawn per trial, uniform in this disc, unless `users_m` is given.
    pub user_center_m: [f64; 2],
    pub user_radius_m: f64,
    pub users_m: Option<Vec<[f64; 2]>>,
    pub alpha_direct: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub ref_distance_m: f64,
    pub ref_loss_db: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = Geometry::default_layout(0, 0);
        Self {
            bs_m: g.bs,
            ris_m: g.ris,
            user_center_m: [70.0, 0.0],
            user_radius_m: 10.0,
            users_m: None,
            alpha_direct: g.alpha_direct,
            alpha_bs_ris: g.alpha_bs_ris,
            alpha_ris_user: g.alpha_ris_user,
            ref_distance_m: g.ref_distance,
            ref_loss_db: g.ref_loss_db,
        }
    }
}

/// A reference task by name, or a fully specified one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSpec {
    Named(String),
    Custom(TaskProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rho: f64,
    pub adaptive_rho: bool,
    pub admm_tol: f64,
    pub admm_max_iter: usize,
    pub admm_stop: StopRule,
    pub els_tol: f64,
    pub els_lo_factor: f64,
    pub els_warm_start: WarmStart,
    pub ao_tol: f64,
    pub ao_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let ao = AoOptions::default();
        Self {
            rho: ao.els.admm.rho,
            adaptive_rho: ao.els.admm.adaptive_rho,
            admm_tol: ao.els.admm.tol,
            admm_max_iter: ao.els.admm.max_iter,
            admm_stop: ao.els.admm.stop,
            els_tol: ao.els.tol,
            els_lo_factor: ao.els.lo_factor,
            els_warm_start: ao.els.warm_start,
            ao_tol: ao.tol,
            ao_max_iter: ao.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: usize,
    /// Schemes compared by `benchmark`.
    pub schemes: Vec<Scheme>,
    /// Antenna counts swept by `benchmark`; defaults to `system.antennas`.
    pub antenna_sweep: Option<Vec<usize>>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { seed: 0, trials: 1, schemes: Scheme::ALL.to_vec(), antenna_sweep: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    pub ris_sizes: Vec<usize>,
    pub trials: usize,
    pub power_watts: f64,
    pub noise_dbm: f64,
    pub rho_h2: f64,
    pub rho_g2: f64,
    pub task: TaskSpec,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            ris_sizes: vec![16, 32, 64, 128, 256],
            trials: 10_000,
            power_watts: DEFAULT_POWER_WATTS,
            noise_dbm: -77.0,
            rho_h2: 1.0,
            rho_g2: 1.0,
            task: TaskSpec::Named("pointnet".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// CSV of `sample_size,test_error` rows, relative to the config file.
    pub points: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub name: Option<String>,
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub tasks: Option<Vec<TaskSpec>>,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
    pub scaling: ScalingSection,
    pub fit: Option<FitSection>,
}

/// Overrides from the command line, applied after parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub rho: Option<f64>,
    pub ao_tol: Option<f64>,
    pub els_tol: Option<f64>,
}

/// A parsed, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub file: ConfigFile,
    pub tasks: Vec<TaskProfile>,
    pub system: SystemConfig,
    pub ao: AoOptions,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn resolve_task(spec: &TaskSpec) -> Result<TaskProfile, String> {
    match spec {
        TaskSpec::Custom(t) => t.validate().map(|_| t.clone()).map_err(|e| e.to_string()),
        TaskSpec::Named(name) => TaskProfile::reference_set(DEFAULT_POWER_WATTS)
            .into_iter()
            .find(|t| t.name == *name)
            .ok_or_else(|| format!("unknown task {name:?} (known: svm, mnist, fashion_mnist, pointnet)")),
    }
}

impl RunConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path, overrides)
    }

    /// Parses config text; `path` is used for diagnostics and relative paths.
    pub fn parse(text: &str, path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        })?;
        let fail = |key: &str, message: String| ConfigError {
            path: path.to_path_buf(),
            line: locate_key(text, key),
            column: None,
            message,
        };
        let flag = |message: String| ConfigError { path: path.to_path_buf(), line: None, column: None, message };

        if let Some(seed) = overrides.seed {
            file.experiment.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            if trials == 0 {
                return Err(flag("--trials must be at least 1".into()));
            }
            file.experiment.trials = trials;
        }
        if let Some(rho) = overrides.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(flag(format!("--rho must be positive, got {rho}")));
            }
            file.solver.rho = rho;
        }
        if let Some(tol) = overrides.ao_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(flag(format!("--ao-tol must be nonnegative, got {tol}")));
            }
            file.solver.ao_tol = tol;
        }
        if let Some(tol) = overrides.els_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(flag(format!("--els-tol must lie in (0, 1), got {tol}")));
            }
            file.solver.els_tol = tol;
        }

        let sys = &file.system;
        for (key, v) in [("bandwidth_hz", sys.bandwidth_hz), ("time_s", sys.time_s)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(fail(key, format!("{key} must be positive, got {v}")));
            }
        }
        if !sys.noise_dbm.is_finite() {
            return Err(fail("noise_dbm", "noise_dbm must be finite".into()));
        }
        if sys.antennas == 0 {
            return Err(fail("antennas", "antennas must be at least 1".into()));
        }
        if sys.users == 0 {
            return Err(fail("users", "users must be at least 1".into()));
        }
        if file.experiment.trials == 0 {
            return Err(fail("trials", "trials must be at least 1".into()));
        }

        let tasks = match &file.tasks {
            None => TaskProfile::reference_set(DEFAULT_POWER_WATTS).into_iter().cycle().take(sys.users).collect(),
            Some(specs) => {
                if specs.len() != sys.users {
                    return Err(fail("tasks", format!("{} tasks listed for {} users", specs.len(), sys.users)));
                }
                specs.iter().map(resolve_task).collect::<Result<Vec<_>, _>>().map_err(|m| fail("tasks", m))?
            }
        };

        let geo = &file.geometry;
        if let Some(users) = &geo.users_m {
            if users.len() != sys.users {
                return Err(fail("users_m", format!("{} user positions for {} users", users.len(), sys.users)));
            }
        }
        if !(geo.user_radius_m >= 0.0) {
            return Err(fail("user_radius_m", format!("user_radius_m must be nonnegative, got {}", geo.user_radius_m)));
        }
        let probe_geometry = Self::geometry_for(geo, sys.users, 0);
        if let Err(e) = probe_geometry.validate() {
            return Err(fail("geometry", e.to_string()));
        }

        let sol = &file.solver;
        if !(sol.rho > 0.0 && sol.rho.is_finite()) {
            return Err(fail("rho", format!("rho must be positive, got {}", sol.rho)));
        }
        if !(sol.els_tol > 0.0 && sol.els_tol < 1.0) {
            return Err(fail("els_tol", format!("els_tol must lie in (0, 1), got {}", sol.els_tol)));
        }
        if !(sol.els_lo_factor > 0.0 && sol.els_lo_factor < 1.0) {
            return Err(fail("els_lo_factor", format!("els_lo_factor must lie in (0, 1), got {}", sol.els_lo_factor)));
        }
        if !(sol.ao_tol >= 0.0) {
            return Err(fail("ao_tol", format!("ao_tol must be nonnegative, got {}", sol.ao_tol)));
        }
        if !(sol.admm_tol > 0.0) {
            return Err(fail("admm_tol", format!("admm_tol must be positive, got {}", sol.admm_tol)));
        }
        if sol.admm_max_iter == 0 {
            return Err(fail("admm_max_iter", "admm_max_iter must be at least 1".into()));
        }
        if let Some(sweep) = &file.experiment.antenna_sweep {
            if sweep.is_empty() || sweep.contains(&0) {
                return Err(fail("antenna_sweep", "antenna_sweep needs positive antenna counts".into()));
            }
        }
        if file.experiment.schemes.is_empty() {
            return Err(fail("schemes", "schemes must not be empty".into()));
        }

        let sc = &file.scaling;
        if sc.ris_sizes.len() < 3 || sc.ris_sizes.iter().any(|&m| m < 2) {
            return Err(fail("ris_sizes", "ris_sizes needs at least 3 sizes, each at least 2".into()));
        }
        if sc.trials == 0 {
            return Err(fail("scaling", "scaling trials must be at least 1".into()));
        }
        for (key, v) in [("power_watts", sc.power_watts), ("rho_h2", sc.rho_h2), ("rho_g2", sc.rho_g2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(fail(key, format!("{key} must be positive, got {v}")));
            }
        }
        resolve_task(&sc.task).map_err(|m| fail("task", m))?;

        let system = SystemConfig {
            bandwidth_hz: sys.bandwidth_hz,
            time_s: sys.time_s,
            noise_watts: dbm_to_watts(sys.noise_dbm),
            n: sys.antennas,
            m: sys.ris_elements,
            k: sys.users,
            sample_mode: sys.sample_mode,
        };
        let ao = AoOptions {
            tol: sol.ao_tol,
            max_iter: sol.ao_max_iter,
            els: ElsOptions {
                tol: sol.els_tol,
                lo_factor: sol.els_lo_factor,
                warm_start: sol.els_warm_start,
                admm: AdmmOptions {
                    rho: sol.rho,
                    tol: sol.admm_tol,
                    max_iter: sol.admm_max_iter,
                    stop: sol.admm_stop,
                    adaptive_rho: sol.adaptive_rho,
                    ..AdmmOptions::default()
                },
                ..ElsOptions::default()
            },
        };
        Ok(Self { path: path.to_path_buf(), file, tasks, system, ao })
    }

    fn geometry_for(geo: &GeometrySection, k: usize, seed: u64) -> Geometry {
        let users = match &geo.users_m {
            Some(u) => u.clone(),
            None => users_in_disc(geo.user_center_m, geo.user_radius_m, k, seed),
        };
        Geometry {
            bs: geo.bs_m,
            ris: geo.ris_m,
            users,
            alpha_direct: geo.alpha_direct,
            alpha_bs_ris: geo.alpha_bs_ris,
            alpha_ris_user: geo.alpha_ris_user,
            ref_distance: geo.ref_distance_m,
            ref_loss_db: geo.ref_loss_db,
        }
    }

    /// Seed of trial `t`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.file.experiment.seed, trial as u64)
    }

    /// Scenario of trial `t` with `n` antennas.
    pub fn scenario(&self, trial: usize, n: usize) -> Scenario {
        let seed = self.trial_seed(trial);
        let mut system = self.system;
        system.n = n;
        Scenario {
            system,
            geometry: Self::geometry_for(&self.file.geometry, self.system.k, seed),
            tasks: self.tasks.clone(),
            seed,
        }
    }

    pub fn trials(&self) -> usize {
        self.file.experiment.trials
    }

    pub fn scaling_params(&self) -> ScalingParams {
        let s = &self.file.scaling;
        ScalingParams { power: s.power_watts, noise: dbm_to_watts(s.noise_dbm), rho_h2: s.rho_h2, rho_g2: s.rho_g2 }
    }

    pub fn scaling_task(&self) -> TaskProfile {
        resolve_task(&self.file.scaling.task).expect("validated at parse")
    }

    /// Points file of the `fit` section, resolved against the config's directory.
    pub fn fit_points(&self) -> Option<PathBuf> {
        let rel = &self.file.fit.as_ref()?.points;
        Some(match self.path.parent() {
            Some(dir) if rel.is_relative() => dir.join(rel),
            _ => rel.clone(),
        })
    }
}
