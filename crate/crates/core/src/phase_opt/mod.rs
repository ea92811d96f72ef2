//! Phase-shift optimization for fixed beamformers.

pub mod admm;
pub mod els;
pub mod qcqp;

pub use admm::{
    admm_feasibility, dual_update, theta_update, AdmmOptions, AdmmOutcome, AdmmRecord, AdmmState, StopRule,
};
pub use els::{els_search, probe, sinr_targets, ElsOptions, ElsResult, ElsStep, Probe, WarmStart};
pub use qcqp::{build_qcqp, chi, chi_prime, q_update, QProjector, QcqpData, ReflectionCoefficients};
