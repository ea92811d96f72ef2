//! Alternating optimization of beamformers and RIS phases, the comparison
//! baselines, and the large-RIS scaling experiment.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{achieved_sinrs, all_beamformers, BeamformerSet};
use crate::channel::{
    complex_gaussian, derive_seed, effective_channels, generate_channels, ChannelSet, Dims, Geometry, PhaseVector,
};
use crate::error::{Error, Result};
use crate::learning::{error_at_sinr, max_error, rate, sample_count, SystemConfig, TaskProfile};
use crate::phase_opt::els::{els_search, ElsOptions, ElsStep};
use crate::phase_opt::qcqp::ReflectionCoefficients;

/// Everything needed to draw and solve one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub geometry: Geometry,
    pub tasks: Vec<TaskProfile>,
    pub seed: u64,
}

impl Scenario {
    /// The four reference tasks (cycled to `k`) in the default layout.
    pub fn reference(n: usize, m: usize, k: usize, seed: u64) -> Self {
        Self {
            system: SystemConfig::reference(n, m, k),
            geometry: Geometry::default_layout(k, seed),
            tasks: TaskProfile::reference_set(crate::learning::DEFAULT_POWER_WATTS)
                .into_iter()
                .cycle()
                .take(k)
                .collect(),
            seed,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.system.n, self.system.m, self.system.k)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry.validate()?;
        if self.tasks.len() != self.system.k {
            return Err(Error::Dimension(format!("{} tasks for K = {}", self.tasks.len(), self.system.k)));
        }
        if self.geometry.users.len() != self.system.k {
            return Err(Error::Dimension(format!(
                "{} user positions for K = {}",
                self.geometry.users.len(),
                self.system.k
            )));
        }
        self.tasks.iter().try_for_each(TaskProfile::validate)
    }

    pub fn channels(&self) -> Result<ChannelSet> {
        generate_channels(&self.geometry, self.dims(), self.seed)
    }

    pub fn powers(&self) -> Vec<f64> {
        powers(&self.tasks)
    }
}

fn powers(tasks: &[TaskProfile]) -> Vec<f64> {
    tasks.iter().map(|t| t.power).collect()
}

/// Per-user link and learning figures at a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub name: String,
    pub sinr: f64,
    /// bits/s/Hz
    pub rate: f64,
    pub samples: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoRecord {
    pub iter: usize,
    pub objective: f64,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    NoRis,
    RandomPhase,
    SumRate,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::NoRis, Scheme::RandomPhase, Scheme::SumRate];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoRis => "no_ris",
            Scheme::RandomPhase => "random_phase",
            Scheme::SumRate => "sum_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scheme: Scheme,
    pub seed: u64,
    pub beamformers: BeamformerSet,
    pub theta: PhaseVector,
    pub tasks: Vec<TaskOutcome>,
    /// Largest per-task error.
    pub objective: f64,
    pub sum_rate: f64,
    pub converged: bool,
    pub trace: Vec<AoRecord>,
    /// ELS steps of each phase update, in AO order.
    #[serde(skip)]
    pub els_traces: Vec<Vec<ElsStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Solution {
    pub fn errors(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.error).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoOptions {
    /// Stop once the relative objective decrease falls to this value.
    pub tol: f64,
    pub max_iter: usize,
    pub els: ElsOptions,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 20, els: ElsOptions::default() }
    }
}

fn sinrs_at(
    ch: &ChannelSet,
    theta: &PhaseVector,
    ws: &BeamformerSet,
    tasks: &[TaskProfile],
    noise: f64,
) -> Result<Vec<f64>> {
    let hs = effective_channels(ch, theta)?;
    achieved_sinrs(&hs, ws, &powers(tasks), noise)
}

/// Max learning error over users for the given phases and beamformers.
///
/// A user with zero SINR receives no samples and contributes infinity.
pub fn objective(
    channels: &ChannelSet,
    theta: &PhaseVector,
    beamformers: &BeamformerSet,
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
) -> Result<f64> {
    if tasks.len() != channels.dims().k || beamformers.len() != tasks.len() {
        return Err(Error::Dimension(format!(
            "{} tasks, {} beamformers, {} users",
            tasks.len(),
            beamformers.len(),
            channels.dims().k
        )));
    }
    let s = sinrs_at(channels, theta, beamformers, tasks, cfg.noise_watts)?;
    Ok(max_error(&s, tasks, cfg))
}

fn outcomes(sinrs: &[f64], tasks: &[TaskProfile], cfg: &SystemConfig) -> Vec<TaskOutcome> {
    sinrs
        .iter()
        .zip(tasks)
        .map(|(&s, t)| {
            let r = rate(s);
            TaskOutcome {
                name: t.name.clone(),
                sinr: s,
                rate: r,
                samples: sample_count(r, cfg, t.bits).unwrap_or(0.0),
                error: error_at_sinr(s, t, cfg),
            }
        })
        .collect()
}

fn record(iter: usize, sinrs: &[f64], tasks: &[TaskProfile], cfg: &SystemConfig) -> AoRecord {
    let errors: Vec<f64> = sinrs.iter().zip(tasks).map(|(&s, t)| error_at_sinr(s, t, cfg)).collect();
    let objective = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AoRecord { iter, objective, errors }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scheme: Scheme,
    seed: u64,
    ws: BeamformerSet,
    theta: PhaseVector,
    sinrs: &[f64],
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
    converged: bool,
    trace: Vec<AoRecord>,
    els_traces: Vec<Vec<ElsStep>>,
) -> Solution {
    let outcomes = outcomes(sinrs, tasks, cfg);
    Solution {
        scheme,
        seed,
        beamformers: ws,
        theta,
        objective: max_error(sinrs, tasks, cfg),
        sum_rate: outcomes.iter().map(|t| t.rate).sum(),
        tasks: outcomes,
        converged,
        trace,
        els_traces,
        wall_time_s: None,
    }
}

/// Runs the alternating optimization on the scenario's channel draw.
pub fn alternating_optimize(scenario: &Scenario, opts: &AoOptions) -> Result<Solution> {
    scenario.validate()?;
    let start = Instant::now();
    let ch = scenario.channels()?;
    let mut sol = optimize_channels(&ch, &scenario.tasks, &scenario.system, opts)?;
    sol.seed = scenario.seed;
    sol.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(sol)
}

/// Alternating optimization from `θ = 1`, `w` = MMSE, on a fixed channel set.
///
/// Each round runs ELS on the phases for fixed beamformers, then recomputes
/// the beamformers; a step is kept only if it does not raise the objective,
/// so the trace never increases.
pub fn optimize_channels(
    ch: &ChannelSet,
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
    opts: &AoOptions,
) -> Result<Solution> {
    if !(opts.tol >= 0.0) {
        return Err(Error::Domain(format!("AO tolerance must be nonnegative, got {}", opts.tol)));
    }
    let m = ch.dims().m;
    let p = powers(tasks);
    let noise = cfg.noise_watts;

    let mut theta = PhaseVector::ones(m);
    let mut ws = all_beamformers(&effective_channels(ch, &theta)?, &p, noise)?;
    let mut sinrs = sinrs_at(ch, &theta, &ws, tasks, noise)?;
    let mut obj = max_error(&sinrs, tasks, cfg);
    let mut trace = vec![record(0, &sinrs, tasks, cfg)];
    let mut els_traces = Vec::new();
    let mut converged = false;

    for iter in 1..=opts.max_iter {
        let prev = obj;
        if m > 0 {
            let els = els_search(ch, &ws, tasks, cfg, &theta, &opts.els)?;
            let s = sinrs_at(ch, &els.theta, &ws, tasks, noise)?;
            let candidate = max_error(&s, tasks, cfg);
            if candidate <= obj {
                theta = els.theta;
                sinrs = s;
                obj = candidate;
            }
            els_traces.push(els.trace);
        }
        let new_ws = all_beamformers(&effective_channels(ch, &theta)?, &p, noise)?;
        let s = sinrs_at(ch, &theta, &new_ws, tasks, noise)?;
        let candidate = max_error(&s, tasks, cfg);
        if candidate <= obj {
            ws = new_ws;
            sinrs = s;
            obj = candidate;
        }
        trace.push(record(iter, &sinrs, tasks, cfg));
        let change = if prev.is_finite() && prev > 0.0 { (prev - obj) / prev } else { 0.0 };
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(finish(Scheme::Proposed, 0, ws, theta, &sinrs, tasks, cfg, converged, trace, els_traces))
}

/// Stream offset for the random-phase baseline's generator.
const RANDOM_PHASE_STREAM: u64 = 0x5248_4153_4521;

/// Sweeps of the sum-rate baseline.
pub const SUM_RATE_SWEEPS: usize = 20;
const SUM_RATE_GRID: usize = 64;

/// Evaluates one comparison scheme on the scenario's channel draw.
pub fn run_baseline(scenario: &Scenario, scheme: Scheme, opts: &AoOptions) -> Result<Solution> {
    scenario.validate()?;
    let start = Instant::now();
    let ch = scenario.channels()?;
    let mut sol = baseline_on_channels(&ch, scheme, &scenario.tasks, &scenario.system, scenario.seed, opts)?;
    sol.seed = scenario.seed;
    sol.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(sol)
}

/// [`run_baseline`] on a given channel set; `seed` drives the random phases.
pub fn baseline_on_channels(
    ch: &ChannelSet,
    scheme: Scheme,
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
    seed: u64,
    opts: &AoOptions,
) -> Result<Solution> {
    let m = ch.dims().m;
    let p = powers(tasks);
    let noise = cfg.noise_watts;
    let fixed = |ch: &ChannelSet, theta: PhaseVector| -> Result<Solution> {
        let ws = all_beamformers(&effective_channels(ch, &theta)?, &p, noise)?;
        let s = sinrs_at(ch, &theta, &ws, tasks, noise)?;
        let trace = vec![record(0, &s, tasks, cfg)];
        Ok(finish(scheme, seed, ws, theta, &s, tasks, cfg, true, trace, Vec::new()))
    };
    match scheme {
        Scheme::Proposed => optimize_channels(ch, tasks, cfg, opts),
        Scheme::NoRis => fixed(&ch.without_ris(), PhaseVector::ones(m)),
        Scheme::RandomPhase => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, RANDOM_PHASE_STREAM));
            fixed(ch, PhaseVector::random(m, &mut rng))
        }
        Scheme::SumRate => sum_rate_solution(ch, tasks, cfg, seed),
    }
}

/// Sum rate when `θ_e` moves by `shift` (so each `s_ki` moves by
/// `conj(shift) a_ki[e]`).
fn shifted_sum_rate(s: &[Vec<Complex64>], coef: &ReflectionCoefficients, e: usize, shift: Complex64) -> f64 {
    let k_users = s.len();
    let d = shift.conj();
    let gain = |k: usize, i: usize| (s[k][i] + d * coef.a[k][i][e]).norm_sqr() * coef.powers[i];
    (0..k_users)
        .map(|k| {
            let interference: f64 = (0..k_users).filter(|&i| i != k).map(|i| gain(k, i)).sum::<f64>() + coef.noise;
            rate(gain(k, k) / interference)
        })
        .sum()
}

/// Sum-rate maximization: MMSE beamformers alternated with one cyclic
/// coordinate-ascent sweep over the phases (grid plus golden-section).
fn sum_rate_solution(ch: &ChannelSet, tasks: &[TaskProfile], cfg: &SystemConfig, seed: u64) -> Result<Solution> {
    let m = ch.dims().m;
    let k_users = tasks.len();
    let p = powers(tasks);
    let noise = cfg.noise_watts;
    let mut theta = PhaseVector::ones(m);
    let mut ws = all_beamformers(&effective_channels(ch, &theta)?, &p, noise)?;
    let mut trace = Vec::new();
    let mut last = f64::NEG_INFINITY;
    let mut converged = false;
    let step = std::f64::consts::TAU / SUM_RATE_GRID as f64;

    for sweep in 0..SUM_RATE_SWEEPS {
        let coef = ReflectionCoefficients::new(ch, &ws, &p, noise)?;
        let mut t = theta.into_vec();
        // s[k][i] = θᴴ a_ki + b_ki, kept current as θ changes.
        let mut s: Vec<Vec<Complex64>> =
            (0..k_users).map(|k| (0..k_users).map(|i| t.dotc(&coef.a[k][i]) + coef.b[k][i]).collect()).collect();
        for e in 0..m {
            let old = t[e];
            let value = |phi: f64| shifted_sum_rate(&s, &coef, e, Complex64::from_polar(1.0, phi) - old);
            let mut best = (old.arg(), shifted_sum_rate(&s, &coef, e, Complex64::new(0.0, 0.0)));
            for g in 0..SUM_RATE_GRID {
                let phi = g as f64 * step;
                let r = value(phi);
                if r > best.1 {
                    best = (phi, r);
                }
            }
            let refined = golden_max(value, best.0 - step, best.0 + step, 1e-9);
            if refined.1 > best.1 {
                best = refined;
            }
            let new = Complex64::from_polar(1.0, best.0);
            let d = (new - old).conj();
            for (sk, ak) in s.iter_mut().zip(&coef.a) {
                for (ski, aki) in sk.iter_mut().zip(ak) {
                    *ski += d * aki[e];
                }
            }
            t[e] = new;
        }
        theta = PhaseVector::project(&t);
        ws = all_beamformers(&effective_channels(ch, &theta)?, &p, noise)?;
        let sinrs = sinrs_at(ch, &theta, &ws, tasks, noise)?;
        let total: f64 = sinrs.iter().map(|&x| rate(x)).sum();
        trace.push(record(sweep, &sinrs, tasks, cfg));
        if total - last <= 1e-9 * total.abs() {
            converged = true;
            break;
        }
        last = total;
    }
    let sinrs = sinrs_at(ch, &theta, &ws, tasks, noise)?;
    Ok(finish(Scheme::SumRate, seed, ws, theta, &sinrs, tasks, cfg, converged, trace, Vec::new()))
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Mean receive SNR of a single-antenna, single-user link through an
/// `m`-element RIS with `Θ = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub m: usize,
    pub mean_snr: f64,
    /// `m p ϱ_h² ϱ_g² / σ²`
    pub predicted_snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub power: f64,
    pub noise: f64,
    /// Variance of each RIS-user coefficient.
    pub rho_h2: f64,
    /// Variance of each BS-RIS coefficient.
    pub rho_g2: f64,
}

/// Monte-Carlo mean of `p |h_rᴴ g|² / σ²` for each RIS size.
pub fn scaling_law_experiment(
    ms: &[usize],
    trials: usize,
    params: &ScalingParams,
    seed: u64,
) -> Result<Vec<ScalingPoint>> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    if !(params.power > 0.0 && params.noise > 0.0 && params.rho_h2 > 0.0 && params.rho_g2 > 0.0) {
        return Err(Error::Domain("power, noise and channel variances must be positive".into()));
    }
    let sh = params.rho_h2.sqrt();
    let sg = params.rho_g2.sqrt();
    ms.iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::Domain("RIS size must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, m as u64));
            let mut total = 0.0;
            for _ in 0..trials {
                let mut acc = Complex64::new(0.0, 0.0);
                for _ in 0..m {
                    let h = complex_gaussian(&mut rng) * sh;
                    let g = complex_gaussian(&mut rng) * sg;
                    acc += h.conj() * g;
                }
                total += params.power * acc.norm_sqr() / params.noise;
            }
            Ok(ScalingPoint {
                m,
                mean_snr: total / trials as f64,
                predicted_snr: m as f64 * params.power * params.rho_h2 * params.rho_g2 / params.noise,
            })
        })
        .collect()
}

/// Linear fit of `error(mean SNR)` against `(log2 M)^(-d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Regresses the task's error at each point's mean SNR on `(log2 M)^(-d)`.
pub fn scaling_fit(points: &[ScalingPoint], task: &TaskProfile, cfg: &SystemConfig) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 RIS sizes, got {}", points.len())));
    }
    if points.iter().any(|p| p.m < 2) {
        return Err(Error::Domain("RIS sizes must be at least 2 for log2 M > 0".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.m as f64).log2().powf(-task.d)).collect();
    let ys: Vec<f64> = points.iter().map(|p| error_at_sinr(p.mean_snr, task, cfg)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant abscissa or error values".into()));
    }
    let slope = sxy / sxx;
    Ok(ScalingFit { slope, intercept: my - slope * mx, r_squared: sxy * sxy / (sxx * syy) })
}
