//! Error level searching: bisection on the common error level `δ`, each
//! probe asking ADMM whether every user can reach the SINR that error level
//! demands.

use serde::{Deserialize, Serialize};

use super::admm::{admm_feasibility, AdmmOptions, AdmmOutcome, AdmmRecord};
use super::qcqp::ReflectionCoefficients;
use crate::beamforming::BeamformerSet;
use crate::channel::{ChannelSet, PhaseVector};
use crate::error::{Error, Result};
use crate::learning::{max_error, rate_target, SystemConfig, TaskProfile};

/// Starting point of each ADMM probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Latest feasible phase vector found so far.
    #[default]
    Previous,
    /// Always the caller's `θ_warm`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElsOptions {
    /// Stop once `δ_lo >= δ_hi (1 - tol)`.
    pub tol: f64,
    /// Initial `δ_lo = δ_hi * lo_factor`.
    pub lo_factor: f64,
    /// Cap on downward expansions of `δ_lo` while it stays feasible.
    pub max_expansions: usize,
    pub warm_start: WarmStart,
    pub admm: AdmmOptions,
}

impl Default for ElsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            lo_factor: 1e-4,
            max_expansions: 8,
            warm_start: WarmStart::Previous,
            admm: AdmmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElsStep {
    pub delta: f64,
    pub feasible: bool,
    pub admm_iters: usize,
    #[serde(skip)]
    pub admm_trace: Vec<AdmmRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElsResult {
    /// Max error achieved by `theta`; feasible by construction.
    pub delta: f64,
    /// Largest level shown infeasible, or 0 when none was.
    pub delta_infeasible: f64,
    pub theta: PhaseVector,
    pub sinrs: Vec<f64>,
    pub trace: Vec<ElsStep>,
}

/// Outcome of one feasibility probe at a fixed error level.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub theta: Option<PhaseVector>,
    pub admm_trace: Vec<AdmmRecord>,
}

/// SINR each user needs for error level `delta`; `None` once any target
/// overflows.
pub fn sinr_targets(delta: f64, tasks: &[TaskProfile], cfg: &SystemConfig) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(tasks.len());
    for t in tasks {
        let g = (rate_target(delta, t, cfg)? * std::f64::consts::LN_2).exp_m1();
        if !g.is_finite() {
            return Ok(None);
        }
        out.push(g);
    }
    Ok(Some(out))
}

/// Runs ADMM for the targets of level `delta`, starting from `start`.
pub fn probe(
    coef: &ReflectionCoefficients,
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
    delta: f64,
    start: &PhaseVector,
    admm: &AdmmOptions,
) -> Result<Probe> {
    let Some(gammas) = sinr_targets(delta, tasks, cfg)? else {
        return Ok(Probe { theta: None, admm_trace: Vec::new() });
    };
    let data = coef.qcqp(&gammas)?;
    Ok(match admm_feasibility(&data, start, admm)? {
        AdmmOutcome::Feasible { theta, trace } => Probe { theta: Some(theta), admm_trace: trace },
        AdmmOutcome::Infeasible { trace, .. } => Probe { theta: None, admm_trace: trace },
    })
}

/// Minimizes the max learning error over RIS phases for fixed beamformers.
pub fn els_search(
    channels: &ChannelSet,
    beamformers: &BeamformerSet,
    tasks: &[TaskProfile],
    cfg: &SystemConfig,
    theta_warm: &PhaseVector,
    opts: &ElsOptions,
) -> Result<ElsResult> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::Domain(format!("ELS tolerance must lie in (0, 1), got {}", opts.tol)));
    }
    if !(opts.lo_factor > 0.0 && opts.lo_factor < 1.0) {
        return Err(Error::Domain(format!("lo_factor must lie in (0, 1), got {}", opts.lo_factor)));
    }
    if tasks.len() != channels.dims().k {
        return Err(Error::Dimension(format!("{} tasks for {} users", tasks.len(), channels.dims().k)));
    }
    let powers: Vec<f64> = tasks.iter().map(|t| t.power).collect();
    let coef = ReflectionCoefficients::new(channels, beamformers, &powers, cfg.noise_watts)?;

    let mut best = theta_warm.clone();
    let mut sinrs = coef.sinrs(best.as_vec());
    let mut hi = max_error(&sinrs, tasks, cfg);
    let mut trace = vec![ElsStep { delta: hi, feasible: true, admm_iters: 0, admm_trace: Vec::new() }];
    if !hi.is_finite() {
        return Ok(ElsResult { delta: hi, delta_infeasible: 0.0, theta: best, sinrs, trace });
    }

    let run = |delta: f64, best: &PhaseVector, trace: &mut Vec<ElsStep>| -> Result<Option<PhaseVector>> {
        let start = match opts.warm_start {
            WarmStart::Previous => best,
            WarmStart::Fixed => theta_warm,
        };
        let p = probe(&coef, tasks, cfg, delta, start, &opts.admm)?;
        trace.push(ElsStep {
            delta,
            feasible: p.theta.is_some(),
            admm_iters: p.admm_trace.len(),
            admm_trace: p.admm_trace,
        });
        Ok(p.theta)
    };

    // ADMM allows a 1e-6 relative SINR slack, so a feasible probe can land a
    // hair above its level; the achieved max error is what counts.
    let accept = |theta: PhaseVector, best: &mut PhaseVector, sinrs: &mut Vec<f64>, hi: &mut f64| -> bool {
        let s = coef.sinrs(theta.as_vec());
        let achieved = max_error(&s, tasks, cfg);
        if achieved >= *hi {
            return false;
        }
        *hi = achieved;
        *best = theta;
        *sinrs = s;
        true
    };

    let mut lo = hi * opts.lo_factor;
    let mut expansions = 0;
    loop {
        let found = run(lo, &best, &mut trace)?;
        if !found.is_some_and(|theta| accept(theta, &mut best, &mut sinrs, &mut hi)) {
            break;
        }
        expansions += 1;
        if expansions > opts.max_expansions {
            return Ok(ElsResult { delta: hi, delta_infeasible: 0.0, theta: best, sinrs, trace });
        }
        lo = hi * opts.lo_factor;
    }

    while lo < hi * (1.0 - opts.tol) {
        let mid = (lo * hi).sqrt();
        let found = run(mid, &best, &mut trace)?;
        if !found.is_some_and(|theta| accept(theta, &mut best, &mut sinrs, &mut hi)) {
            lo = mid;
        }
    }
    Ok(ElsResult { delta: hi, delta_infeasible: lo, theta: best, sinrs, trace })
}
