//! Closed-form SINR-optimal receive beamforming for fixed RIS phases.
//!
//! For user `k` the combiner `(I + Σ_i (p_i/σ²) h_i h_iᴴ)⁻¹ h_k`, normalized,
//! maximizes the SINR over all unit-norm vectors. The sum runs over every user
//! including `k`; that term only rescales the solution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::sinr;
use crate::numerics::{ComplexMat, ComplexVec, HpdFactor};

/// One unit-norm receive beamformer per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<Complex64>>", try_from = "Vec<Vec<Complex64>>")]
pub struct BeamformerSet(Vec<ComplexVec>);

impl From<BeamformerSet> for Vec<Vec<Complex64>> {
    fn from(ws: BeamformerSet) -> Self {
        ws.0.iter().map(|w| w.iter().copied().collect()).collect()
    }
}

impl TryFrom<Vec<Vec<Complex64>>> for BeamformerSet {
    type Error = Error;

    fn try_from(ws: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(ws.into_iter().map(ComplexVec::from_vec).collect())
    }
}

impl BeamformerSet {
    pub fn new(ws: Vec<ComplexVec>) -> Result<Self> {
        for (k, w) in ws.iter().enumerate() {
            if (w.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("beamformer {k} has norm {}", w.norm())));
            }
        }
        Ok(Self(ws))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> &ComplexVec {
        &self.0[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexVec> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[ComplexVec] {
        &self.0
    }
}

fn fix_phase(mut w: ComplexVec) -> ComplexVec {
    let peak = w.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if let Some(first) = w.iter().find(|z| z.norm() > 1e-9 * peak).copied() {
        let rot = first.conj() / first.norm();
        w *= rot;
    }
    w
}

fn normalized(x: ComplexVec, k: usize) -> Result<ComplexVec> {
    let norm = x.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateChannel(k));
    }
    Ok(fix_phase(x / Complex64::new(norm, 0.0)))
}

/// Unit-norm SINR-maximizing beamformer of user `k`.
///
/// The global phase is fixed so the first nonzero entry is real and positive.
pub fn mmse_beamformer(channels: &[ComplexVec], powers: &[f64], noise: f64, k: usize) -> Result<ComplexVec> {
    if k >= channels.len() {
        return Err(Error::Index { index: k, len: channels.len() });
    }
    if channels[k].iter().all(|z| z.norm() == 0.0) {
        return Err(Error::DegenerateChannel(k));
    }
    let factor = HpdFactor::new(&outer_sum(channels, powers, noise)?)?;
    normalized(factor.solve(&channels[k]), k)
}

/// Beamformers for every user from one factorization.
pub fn all_beamformers(channels: &[ComplexVec], powers: &[f64], noise: f64) -> Result<BeamformerSet> {
    if let Some(k) = channels.iter().position(|h| h.iter().all(|z| z.norm() == 0.0)) {
        return Err(Error::DegenerateChannel(k));
    }
    let factor = HpdFactor::new(&outer_sum(channels, powers, noise)?)?;
    let ws = channels.iter().enumerate().map(|(k, h)| normalized(factor.solve(h), k)).collect::<Result<Vec<_>>>()?;
    Ok(BeamformerSet(ws))
}

/// `I + Σ_i (p_i/σ²) h_i h_iᴴ`.
fn outer_sum(channels: &[ComplexVec], powers: &[f64], noise: f64) -> Result<ComplexMat> {
    if !(noise > 0.0) {
        return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
    }
    if powers.len() != channels.len() || channels.is_empty() {
        return Err(Error::Dimension(format!("{} powers for {} users", powers.len(), channels.len())));
    }
    let n = channels[0].len();
    if channels.iter().any(|h| h.len() != n) {
        return Err(Error::Dimension("effective channels differ in length".into()));
    }
    let mut r = ComplexMat::identity(n, n);
    for (h, &p) in channels.iter().zip(powers) {
        r += (h * h.adjoint()) * Complex64::new(p / noise, 0.0);
    }
    Ok(r)
}

/// SINR achieved by each user with its own beamformer.
pub fn achieved_sinrs(channels: &[ComplexVec], ws: &BeamformerSet, powers: &[f64], noise: f64) -> Result<Vec<f64>> {
    (0..channels.len()).map(|k| sinr(channels, ws.get(k), k, powers, noise)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channels(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexVec> {
        (0..k).map(|_| ComplexVec::from_fn(n, |_, _| complex_gaussian(rng))).collect()
    }

    #[test]
    fn single_user_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hs = random_channels(5, 1, &mut rng);
        let w = mmse_beamformer(&hs, &[2.0], 0.3, 0).unwrap();
        let matched = fix_phase(hs[0].normalize());
        assert!((w - matched).norm() < 1e-12);
    }

    #[test]
    fn unit_norm_and_phase_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hs = random_channels(4, 3, &mut rng);
        let ws = all_beamformers(&hs, &[1.0, 0.5, 2.0], 0.1).unwrap();
        for w in ws.iter() {
            assert!((w.norm() - 1.0).abs() < 1e-12);
            assert!(w[0].im.abs() < 1e-14 && w[0].re > 0.0);
        }
    }

    #[test]
    fn identical_channels_identical_beamformers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_channels(3, 1, &mut rng).remove(0);
        let ws = all_beamformers(&[h.clone(), h], &[1.0, 1.0], 1.0).unwrap();
        assert!((ws.get(0) - ws.get(1)).norm() < 1e-14);
    }

    #[test]
    fn batched_equals_per_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hs = random_channels(6, 4, &mut rng);
        let p = [0.3, 1.0, 2.0, 0.7];
        let ws = all_beamformers(&hs, &p, 0.2).unwrap();
        for k in 0..4 {
            let w = mmse_beamformer(&hs, &p, 0.2, k).unwrap();
            assert!((w - ws.get(k)).norm() < 1e-12);
        }
    }

    #[test]
    fn beats_random_unit_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hs = random_channels(4, 3, &mut rng);
        let p = [1.0, 0.8, 1.5];
        let noise = 0.5;
        for k in 0..3 {
            let w = mmse_beamformer(&hs, &p, noise, k).unwrap();
            let best = sinr(&hs, &w, k, &p, noise).unwrap();
            for _ in 0..10_000 {
                let v = ComplexVec::from_fn(4, |_, _| complex_gaussian(&mut rng)).normalize();
                let s = sinr(&hs, &v, k, &p, noise).unwrap();
                assert!(s <= best * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hs = random_channels(3, 2, &mut rng);
        let p = [1.0, 2.0];
        let scaled: Vec<ComplexVec> = hs.iter().map(|h| h * Complex64::new(7.0, 0.0)).collect();
        for k in 0..2 {
            let a = mmse_beamformer(&hs, &p, 0.4, k).unwrap();
            let b = mmse_beamformer(&scaled, &p, 0.4 * 49.0, k).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let hs = vec![ComplexVec::zeros(2), ComplexVec::from_element(2, Complex64::new(1.0, 0.0))];
        assert_eq!(mmse_beamformer(&hs, &[1.0, 1.0], 1.0, 0).unwrap_err(), Error::DegenerateChannel(0));
        assert_eq!(all_beamformers(&hs, &[1.0, 1.0], 1.0).unwrap_err(), Error::DegenerateChannel(0));
    }
}
