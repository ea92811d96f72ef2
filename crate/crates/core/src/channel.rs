//! Rayleigh-fading channel realizations for a BS / RIS / users layout.
//!
//! Every coefficient is a unit-variance circularly-symmetric complex Gaussian
//! scaled by the square root of its link gain `L0 (d / d0)^(-alpha)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMat, ComplexVec};

/// Tolerance on `|theta_m| = 1`.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// BS antennas.
    pub n: usize,
    /// RIS elements.
    pub m: usize,
    /// Users.
    pub k: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize, k: usize) -> Self {
        Self { n, m, k }
    }
}

/// Node positions (metres) and large-scale fading parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    pub users: Vec<[f64; 2]>,
    pub alpha_direct: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub ref_distance: f64,
    /// Loss at the reference distance, dB, applied once per link.
    pub ref_loss_db: f64,
}

impl Geometry {
    /// BS at the origin, RIS at (50, 10), `k` users uniform in a 10 m disc
    /// around (70, 0); exponents 4 (direct) and 2.2 (both RIS hops).
    pub fn default_layout(k: usize, seed: u64) -> Self {
        let users = users_in_disc([70.0, 0.0], 10.0, k, seed);
        Self {
            bs: [0.0, 0.0],
            ris: [50.0, 10.0],
            users,
            alpha_direct: 4.0,
            alpha_bs_ris: 2.2,
            alpha_ris_user: 2.2,
            ref_distance: 1.0,
            ref_loss_db: 30.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [
            ("alpha_direct", self.alpha_direct),
            ("alpha_bs_ris", self.alpha_bs_ris),
            ("alpha_ris_user", self.alpha_ris_user),
            ("ref_distance", self.ref_distance),
        ] {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {a}")));
            }
        }
        if distance(self.bs, self.ris) <= 0.0 {
            return Err(Error::Domain("BS and RIS coincide".into()));
        }
        for (k, &u) in self.users.iter().enumerate() {
            if distance(u, self.bs) <= 0.0 || distance(u, self.ris) <= 0.0 {
                return Err(Error::Domain(format!("user {k} coincides with the BS or the RIS")));
            }
        }
        Ok(())
    }

    /// Power gain of a link of length `d` with exponent `alpha`.
    pub fn link_gain(&self, d: f64, alpha: f64) -> f64 {
        10f64.powf(-self.ref_loss_db / 10.0) * (d / self.ref_distance).powf(-alpha)
    }

    pub fn direct_gain(&self, k: usize) -> f64 {
        self.link_gain(distance(self.users[k], self.bs), self.alpha_direct)
    }

    pub fn ris_user_gain(&self, k: usize) -> f64 {
        self.link_gain(distance(self.users[k], self.ris), self.alpha_ris_user)
    }

    pub fn bs_ris_gain(&self) -> f64 {
        self.link_gain(distance(self.bs, self.ris), self.alpha_bs_ris)
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `k` positions uniform over a disc; a pure function of the arguments.
pub fn users_in_disc(center: [f64; 2], radius: f64, k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6765_6f6d_6574_7279);
    (0..k).map(|_| sample_disc(&mut rng, center, radius)).collect()
}

fn sample_disc(rng: &mut impl Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
}

/// Draws one `CN(0, 1)` sample as two real Gaussians of variance 1/2.
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Mixes a trial index into a root seed (splitmix64 finalizer).
pub fn derive_seed(root: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(root ^ mix(trial))
}

/// One realization of every channel in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h_d,k` in C^N, user to BS.
    pub direct: Vec<ComplexVec>,
    /// `h_r,k` in C^M, user to RIS.
    pub ris_user: Vec<ComplexVec>,
    /// `G` in C^{M x N}, RIS to BS.
    pub ris_bs: ComplexMat,
    /// Amplitude reflection coefficient.
    pub beta: f64,
}

impl ChannelSet {
    pub fn new(direct: Vec<ComplexVec>, ris_user: Vec<ComplexVec>, ris_bs: ComplexMat, beta: f64) -> Result<Self> {
        let set = Self { direct, ris_user, ris_bs, beta };
        set.validate()?;
        Ok(set)
    }

    pub fn dims(&self) -> Dims {
        Dims { n: self.ris_bs.ncols(), m: self.ris_bs.nrows(), k: self.direct.len() }
    }

    pub fn validate(&self) -> Result<()> {
        let Dims { n, m, k } = self.dims();
        if self.ris_user.len() != k {
            return Err(Error::Dimension(format!("{} direct links but {} RIS links", k, self.ris_user.len())));
        }
        if self.direct.iter().any(|h| h.len() != n) {
            return Err(Error::Dimension(format!("direct links must have length N = {n}")));
        }
        if self.ris_user.iter().any(|h| h.len() != m) {
            return Err(Error::Dimension(format!("RIS links must have length M = {m}")));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Domain(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    /// Same realization with the reflected path removed.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.ris_bs.fill(Complex64::new(0.0, 0.0));
        out
    }

    fn check_user(&self, k: usize) -> Result<()> {
        if k >= self.direct.len() {
            return Err(Error::Index { index: k, len: self.direct.len() });
        }
        Ok(())
    }
}

/// Draws a channel realization; a pure function of its arguments.
pub fn generate_channels(geometry: &Geometry, dims: Dims, seed: u64) -> Result<ChannelSet> {
    if dims.n == 0 || dims.k == 0 {
        return Err(Error::Dimension("N and K must be positive".into()));
    }
    if geometry.users.len() != dims.k {
        return Err(Error::Dimension(format!("geometry has {} users, dims ask for {}", geometry.users.len(), dims.k)));
    }
    geometry.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_scale = geometry.bs_ris_gain().sqrt();
    let ris_bs = ComplexMat::from_fn(dims.m, dims.n, |_, _| complex_gaussian(&mut rng) * g_scale);
    let mut direct = Vec::with_capacity(dims.k);
    let mut ris_user = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let d_scale = geometry.direct_gain(k).sqrt();
        direct.push(ComplexVec::from_fn(dims.n, |_, _| complex_gaussian(&mut rng) * d_scale));
        let r_scale = geometry.ris_user_gain(k).sqrt();
        ris_user.push(ComplexVec::from_fn(dims.m, |_, _| complex_gaussian(&mut rng) * r_scale));
    }
    ChannelSet::new(direct, ris_user, ris_bs, 1.0)
}

/// RIS coefficients `theta`, with `Theta = beta diag(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Complex64>", try_from = "Vec<Complex64>")]
pub struct PhaseVector(ComplexVec);

impl From<PhaseVector> for Vec<Complex64> {
    fn from(theta: PhaseVector) -> Self {
        theta.0.iter().copied().collect()
    }
}

impl TryFrom<Vec<Complex64>> for PhaseVector {
    type Error = Error;

    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        Self::new(ComplexVec::from_vec(v))
    }
}

impl PhaseVector {
    pub fn new(theta: ComplexVec) -> Result<Self> {
        if let Some(m) = theta.iter().position(|z| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::Domain(format!("theta[{m}] has modulus {}", theta[m].norm())));
        }
        Ok(Self(theta))
    }

    pub fn ones(m: usize) -> Self {
        Self(ComplexVec::from_element(m, Complex64::new(1.0, 0.0)))
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(ComplexVec::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(1.0, p))))
    }

    pub fn random(m: usize, rng: &mut impl Rng) -> Self {
        let phases: Vec<f64> = (0..m).map(|_| std::f64::consts::TAU * rng.random::<f64>()).collect();
        Self::from_phases(&phases)
    }

    /// Entry-wise projection onto the unit circle; a zero entry maps to 1.
    pub fn project(v: &ComplexVec) -> Self {
        Self(v.map(|z| if z.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { z / z.norm() }))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vec(&self) -> &ComplexVec {
        &self.0
    }

    pub fn into_vec(self) -> ComplexVec {
        self.0
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }
}

/// `h_k = h_d,k + Gᴴ Θᴴ h_r,k`.
pub fn effective_channel(ch: &ChannelSet, theta: &PhaseVector, k: usize) -> Result<ComplexVec> {
    ch.check_user(k)?;
    let m = ch.dims().m;
    if theta.len() != m {
        return Err(Error::Dimension(format!("theta has length {}, RIS has {m} elements", theta.len())));
    }
    let scaled = theta.as_vec().zip_map(&ch.ris_user[k], |t, h| t.conj() * h * ch.beta);
    Ok(&ch.direct[k] + ch.ris_bs.adjoint() * scaled)
}

pub fn effective_channels(ch: &ChannelSet, theta: &PhaseVector) -> Result<Vec<ComplexVec>> {
    (0..ch.dims().k).map(|k| effective_channel(ch, theta, k)).collect()
}

/// Coefficients `(a, b)` with `θᴴa + b = wᴴ h_i(θ)` for every `θ`, where `w`
/// is the beamformer of some user `k`.
///
/// `a = β diag(h_r,i) conj(G w)` and `b = wᴴ h_d,i`.
pub fn reflected_coefficients(ch: &ChannelSet, w: &ComplexVec, i: usize) -> Result<(ComplexVec, Complex64)> {
    ch.check_user(i)?;
    if w.len() != ch.dims().n {
        return Err(Error::Dimension(format!("beamformer has length {}, BS has {} antennas", w.len(), ch.dims().n)));
    }
    let gw = &ch.ris_bs * w;
    let a = ch.ris_user[i].zip_map(&gw, |h, g| h * g.conj() * ch.beta);
    let b = w.dotc(&ch.direct[i]);
    Ok((a, b))
}

/// Serializable dump of one realization, for cross-implementation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub seed: u64,
    pub dims: Dims,
    pub geometry: Geometry,
    pub beta: f64,
    /// `h_d,k`, one row per user.
    pub direct: Vec<Vec<Complex64>>,
    /// `h_r,k`, one row per user.
    pub ris_user: Vec<Vec<Complex64>>,
    /// `G`, row-major (M rows of N entries).
    pub ris_bs: Vec<Vec<Complex64>>,
}

impl ChannelDump {
    pub fn new(seed: u64, geometry: &Geometry, ch: &ChannelSet) -> Self {
        let g = &ch.ris_bs;
        Self {
            seed,
            dims: ch.dims(),
            geometry: geometry.clone(),
            beta: ch.beta,
            direct: ch.direct.iter().map(|h| h.iter().copied().collect()).collect(),
            ris_user: ch.ris_user.iter().map(|h| h.iter().copied().collect()).collect(),
            ris_bs: (0..g.nrows()).map(|r| g.row(r).iter().copied().collect()).collect(),
        }
    }

    pub fn to_channels(&self) -> Result<ChannelSet> {
        let Dims { n, m, .. } = self.dims;
        if self.ris_bs.len() != m || self.ris_bs.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("G rows do not match dims".into()));
        }
        let g = ComplexMat::from_fn(m, n, |r, c| self.ris_bs[r][c]);
        let direct = self.direct.iter().map(|h| ComplexVec::from_vec(h.clone())).collect();
        let ris_user = self.ris_user.iter().map(|h| ComplexVec::from_vec(h.clone())).collect();
        let set = ChannelSet::new(direct, ris_user, g, self.beta)?;
        if set.dims() != self.dims {
            return Err(Error::Dimension("coefficients do not match dims".into()));
        }
        Ok(set)
    }
}
