//! Consensus ADMM for the SINR-target feasibility problem over unit-modulus
//! RIS vectors.
//!
//! Each user keeps a copy `q_k` of the phase vector constrained only by its own
//! SINR target; `θ` carries the unit-modulus constraint; `q_k = θ` is enforced
//! through scaled duals `u_k`. One iteration is
//!
//! ```text
//! q_k <- proj_{B_k}(θ - u_k)              (independent per user)
//! θ   <- proj_C(mean_k(q_k + u_k))
//! u_k <- u_k + q_k - θ
//! ```

use serde::{Deserialize, Serialize};

use super::qcqp::{QProjector, QcqpData};
use crate::channel::PhaseVector;
use crate::error::{Error, Result};
use crate::numerics::ComplexVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop at the first iterate whose `θ` meets every SINR target.
    #[default]
    FirstFeasible,
    /// Stop once `θ` is feasible and the primal residual is below `tol`.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho: f64,
    /// Primal residual tolerance, `max_k ‖q_k - θ‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub stop: StopRule,
    /// Residual balancing: doubles or halves `ρ` when one residual dominates
    /// the other by a factor of 10.
    pub adaptive_rho: bool,
    /// Relative slack on `SINR_k >= γ_k` when declaring feasibility.
    pub feasibility_slack: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol: 1e-4,
            max_iter: 500,
            stop: StopRule::FirstFeasible,
            adaptive_rho: false,
            feasibility_slack: 1e-6,
        }
    }
}

/// Iterates of one ADMM run.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub q: Vec<ComplexVec>,
    pub u: Vec<ComplexVec>,
    pub theta: PhaseVector,
    pub rho: f64,
    pub iter: usize,
    pub residuals: Vec<f64>,
}

impl AdmmState {
    /// `q_k = θ₀`, `u_k = 0`.
    pub fn new(theta: PhaseVector, users: usize, rho: f64) -> Self {
        let m = theta.len();
        Self {
            q: vec![theta.as_vec().clone(); users],
            u: vec![ComplexVec::zeros(m); users],
            theta,
            rho,
            iter: 0,
            residuals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmRecord {
    pub iter: usize,
    pub primal_residual: f64,
    pub sinr: Vec<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmmOutcome {
    Feasible {
        theta: PhaseVector,
        trace: Vec<AdmmRecord>,
    },
    /// Iteration cap reached, or `blocking_user`'s constraint set is empty.
    Infeasible {
        trace: Vec<AdmmRecord>,
        blocking_user: Option<usize>,
    },
}

impl AdmmOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }

    pub fn trace(&self) -> &[AdmmRecord] {
        match self {
            Self::Feasible { trace, .. } | Self::Infeasible { trace, .. } => trace,
        }
    }

    pub fn iterations(&self) -> usize {
        self.trace().len()
    }
}

/// Projection of `mean_k(q_k + u_k)` onto the unit circle, entry-wise.
pub fn theta_update(q: &[ComplexVec], u: &[ComplexVec]) -> PhaseVector {
    let m = q.first().map_or(0, |v| v.len());
    let mut mean = ComplexVec::zeros(m);
    for (qk, uk) in q.iter().zip(u) {
        mean += qk + uk;
    }
    PhaseVector::project(&mean)
}

/// Scaled dual ascent `u + q - θ`.
pub fn dual_update(u: &ComplexVec, q: &ComplexVec, theta: &PhaseVector) -> ComplexVec {
    u + q - theta.as_vec()
}

fn feasible(data: &[QcqpData], theta: &ComplexVec, slack: f64) -> (bool, Vec<f64>) {
    let sinrs: Vec<f64> = data.iter().map(|d| d.sinr(theta)).collect();
    let ok = data.iter().zip(&sinrs).all(|(d, &s)| s >= d.gamma * (1.0 - slack));
    (ok, sinrs)
}

/// Searches for a unit-modulus `θ` meeting every user's SINR target.
pub fn admm_feasibility(data: &[QcqpData], theta_init: &PhaseVector, opts: &AdmmOptions) -> Result<AdmmOutcome> {
    if !(opts.rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {}", opts.rho)));
    }
    let m = theta_init.len();
    if data.iter().any(|d| d.a_mat.nrows() != m) {
        return Err(Error::Dimension(format!("constraint data does not match {m} RIS elements")));
    }
    // Cheap necessary condition before any eigendecomposition.
    for d in data {
        let k = d.user;
        let (Some(akk), Some(bkk), Some(pk)) = (d.a.get(k), d.b.get(k), d.powers.get(k)) else {
            continue;
        };
        let amp = akk.iter().map(|z| z.norm()).sum::<f64>() + bkk.norm();
        if pk * amp * amp / d.noise < d.gamma {
            return Ok(AdmmOutcome::Infeasible { trace: Vec::new(), blocking_user: Some(k) });
        }
    }

    let projectors = data.iter().map(QProjector::new).collect::<Result<Vec<_>>>()?;
    let mut state = AdmmState::new(theta_init.clone(), data.len(), opts.rho);
    let mut trace = Vec::new();

    while state.iter < opts.max_iter {
        state.iter += 1;
        for (k, proj) in projectors.iter().enumerate() {
            let zeta = state.theta.as_vec() - &state.u[k];
            match proj.project(&zeta) {
                Ok(q) => state.q[k] = q,
                Err(Error::Infeasible(user)) => {
                    return Ok(AdmmOutcome::Infeasible { trace, blocking_user: Some(user) });
                }
                Err(e) => return Err(e),
            }
        }
        let theta = theta_update(&state.q, &state.u);
        for k in 0..state.u.len() {
            state.u[k] = dual_update(&state.u[k], &state.q[k], &theta);
        }
        let primal = state
            .q
            .iter()
            .map(|q| (q - theta.as_vec()).iter().fold(0.0f64, |acc, z| acc.max(z.norm())))
            .fold(0.0f64, f64::max);
        let dual = opts.rho * (theta.as_vec() - state.theta.as_vec()).norm() * (data.len() as f64).sqrt();
        state.theta = theta;
        state.residuals.push(primal);

        let (ok, sinr) = feasible(data, state.theta.as_vec(), opts.feasibility_slack);
        trace.push(AdmmRecord { iter: state.iter, primal_residual: primal, sinr, feasible: ok });

        let done = match opts.stop {
            StopRule::FirstFeasible => ok,
            StopRule::Converged => ok && primal <= opts.tol,
        };
        if done {
            return Ok(AdmmOutcome::Feasible { theta: state.theta, trace });
        }

        if opts.adaptive_rho {
            let primal_norm: f64 =
                state.q.iter().map(|q| (q - state.theta.as_vec()).norm_squared()).sum::<f64>().sqrt();
            let factor = if primal_norm > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal_norm {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                state.rho *= factor;
                for u in state.u.iter_mut() {
                    *u /= num_complex::Complex64::new(factor, 0.0);
                }
            }
        }
    }
    Ok(AdmmOutcome::Infeasible { trace, blocking_user: None })
}
