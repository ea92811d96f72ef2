//! Learning-centric link metrics: SINR, rate, training-sample count and the
//! power-law error model `error(v) = c v^(-d)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexVec;

/// One user's learning task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub name: String,
    /// Error-model scale.
    pub c: f64,
    /// Error-model exponent.
    pub d: f64,
    /// Bits per training sample.
    #[serde(rename = "D_bits")]
    pub bits: f64,
    #[serde(rename = "power_watts")]
    pub power: f64,
}

impl TaskProfile {
    pub fn new(name: impl Into<String>, c: f64, d: f64, bits: f64, power: f64) -> Result<Self> {
        let task = Self { name: name.into(), c, d, bits, power };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.d > 0.0 && self.bits >= 1.0 && self.power > 0.0) {
            return Err(Error::Domain(format!(
                "task {:?}: need c > 0, d > 0, D >= 1, p > 0 (got c={}, d={}, D={}, p={})",
                self.name, self.c, self.d, self.bits, self.power
            )));
        }
        Ok(())
    }

    /// SVM on 8x8 digits.
    pub fn svm(power: f64) -> Self {
        Self { name: "svm".into(), c: 7.07, d: 0.81, bits: 324.0, power }
    }

    /// CNN on MNIST.
    pub fn mnist(power: f64) -> Self {
        Self { name: "mnist".into(), c: 10.79, d: 0.73, bits: 6276.0, power }
    }

    /// CNN on Fashion-MNIST.
    pub fn fashion_mnist(power: f64) -> Self {
        Self { name: "fashion_mnist".into(), c: 0.82, d: 0.23, bits: 6276.0, power }
    }

    /// PointNet on ModelNet40.
    pub fn pointnet(power: f64) -> Self {
        Self { name: "pointnet".into(), c: 0.96, d: 0.24, bits: 192_008.0, power }
    }

    /// The four reference tasks, each transmitting at `power` watts.
    pub fn reference_set(power: f64) -> Vec<Self> {
        vec![Self::svm(power), Self::mnist(power), Self::fashion_mnist(power), Self::pointnet(power)]
    }
}

/// Default per-user transmit power, watts.
pub const DEFAULT_POWER_WATTS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCountMode {
    /// `B T R / D` without flooring.
    #[default]
    Continuous,
    /// `floor(B T R / D)`.
    Floor,
}

/// System-wide link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub bandwidth_hz: f64,
    pub time_s: f64,
    pub noise_watts: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    #[serde(default)]
    pub sample_mode: SampleCountMode,
}

impl SystemConfig {
    /// B = 5 MHz, T = 10 s, noise -77 dBm.
    pub fn reference(n: usize, m: usize, k: usize) -> Self {
        Self {
            bandwidth_hz: 5e6,
            time_s: 10.0,
            noise_watts: dbm_to_watts(-77.0),
            n,
            m,
            k,
            sample_mode: SampleCountMode::Continuous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.time_s > 0.0 && self.noise_watts > 0.0) {
            return Err(Error::Domain("bandwidth, time and noise power must be positive".into()));
        }
        if self.n == 0 || self.k == 0 {
            return Err(Error::Domain("N and K must be positive".into()));
        }
        Ok(())
    }

    pub fn bt(&self) -> f64 {
        self.bandwidth_hz * self.time_s
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// SINR of user `k` under receive beamformer `w`:
/// `p_k |wᴴh_k|² / (Σ_{i≠k} p_i |wᴴh_i|² + σ²)`.
pub fn sinr(channels: &[ComplexVec], w: &ComplexVec, k: usize, powers: &[f64], noise: f64) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
    }
    if k >= channels.len() {
        return Err(Error::Index { index: k, len: channels.len() });
    }
    if powers.len() != channels.len() {
        return Err(Error::Dimension(format!("{} powers for {} users", powers.len(), channels.len())));
    }
    let gains: Vec<f64> = channels.iter().map(|h| w.dotc(h).norm_sqr()).collect();
    Ok(sinr_from_gains(&gains, k, powers, noise))
}

/// SINR from precomputed `|wᴴh_i|²` values.
pub fn sinr_from_gains(gains: &[f64], k: usize, powers: &[f64], noise: f64) -> f64 {
    let interference: f64 =
        gains.iter().zip(powers).enumerate().filter(|&(i, _)| i != k).map(|(_, (g, p))| g * p).sum();
    powers[k] * gains[k] / (interference + noise)
}

/// Spectral efficiency `log2(1 + sinr)`, bits/s/Hz.
pub fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// Training samples delivered at rate `r`: `B T r / D`, floored in
/// [`SampleCountMode::Floor`].
pub fn sample_count(r: f64, cfg: &SystemConfig, bits: f64) -> Result<f64> {
    if bits == 0.0 {
        return Err(Error::Domain("bits per sample must be nonzero".into()));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("rate must be nonnegative, got {r}")));
    }
    let v = cfg.bt() * r / bits;
    Ok(match cfg.sample_mode {
        SampleCountMode::Continuous => v,
        SampleCountMode::Floor => v.floor(),
    })
}

/// Predicted classification error `c v^(-d)`.
pub fn error(v: f64, task: &TaskProfile) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("sample count must be positive, got {v}")));
    }
    Ok(task.c * v.powf(-task.d))
}

/// Error of `task` when its SINR is `s`; infinite when no samples arrive.
pub fn error_at_sinr(s: f64, task: &TaskProfile, cfg: &SystemConfig) -> f64 {
    match sample_count(rate(s.max(0.0)), cfg, task.bits) {
        Ok(v) if v > 0.0 => task.c * v.powf(-task.d),
        _ => f64::INFINITY,
    }
}

/// SINR at which `task` reaches error exactly `delta`:
/// `2^(D (c/δ)^(1/d) / (B T)) - 1`.
pub fn sinr_target(delta: f64, task: &TaskProfile, cfg: &SystemConfig) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("error level must be positive, got {delta}")));
    }
    Ok((rate_target(delta, task, cfg)? * std::f64::consts::LN_2).exp_m1())
}

/// Smallest spectral efficiency at which `task` reaches error `delta`.
///
/// Finite even where [`sinr_target`] overflows.
pub fn rate_target(delta: f64, task: &TaskProfile, cfg: &SystemConfig) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("error level must be positive, got {delta}")));
    }
    let v = (task.c / delta).powf(1.0 / task.d);
    let v = match cfg.sample_mode {
        SampleCountMode::Continuous => v,
        SampleCountMode::Floor => v.ceil(),
    };
    Ok(task.bits * v / cfg.bt())
}

/// `max_k` of each task's error at the matching SINR.
pub fn max_error(sinrs: &[f64], tasks: &[TaskProfile], cfg: &SystemConfig) -> f64 {
    sinrs.iter().zip(tasks).map(|(&s, t)| error_at_sinr(s, t, cfg)).fold(f64::NEG_INFINITY, f64::max)
}

/// Log-log least-squares fit of `error = c v^(-d)`; returns `(c, d)`.
pub fn fit_error_model(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 points, got {}", points.len())));
    }
    for (row, &(v, e)) in points.iter().enumerate() {
        if !(v > 0.0) || !(e > 0.0 && e <= 1.0) {
            return Err(Error::Domain(format!("point {row}: need v > 0 and error in (0, 1], got ({v}, {e})")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-300 || sxx <= 1e-24 * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::Degenerate("all points share the same sample size".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok((intercept.exp(), -slope))
}
