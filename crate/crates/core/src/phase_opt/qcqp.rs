//! Per-user SINR constraints as quadratic constraints on the RIS vector, and
//! the Euclidean projection onto one such constraint set.
//!
//! For fixed beamformers, `SINR_k(q) >= γ_k` is equivalent to
//! `qᴴ A_k q - 2 Re{b_kᴴ q} <= τ_k`. Projecting `ζ` onto that set has one
//! multiplier `μ >= 0`; in the eigenbasis of `A_k` the minimizer is
//! `q̃ = (I + μΛ)⁻¹ (ζ̃ + μ b̃)` and `μ` is the unique root of the strictly
//! decreasing `χ(μ)` on the interval where `I + μΛ ⪰ 0`.

use num_complex::Complex64;

use crate::beamforming::BeamformerSet;
use crate::channel::{reflected_coefficients, ChannelSet};
use crate::error::{Error, Result};
use crate::numerics::{find_root_safeguarded, hermitian_eig, Bracket, ComplexMat, ComplexVec};

/// `(a_{k,i}, b_{k,i})` for every beamformer `k` and user `i`, so that
/// `θᴴ a_{k,i} + b_{k,i} = w_kᴴ h_i(θ)`.
#[derive(Debug, Clone)]
pub struct ReflectionCoefficients {
    pub a: Vec<Vec<ComplexVec>>,
    pub b: Vec<Vec<Complex64>>,
    pub powers: Vec<f64>,
    pub noise: f64,
}

impl ReflectionCoefficients {
    pub fn new(channels: &ChannelSet, beamformers: &BeamformerSet, powers: &[f64], noise: f64) -> Result<Self> {
        let k_users = channels.dims().k;
        if beamformers.len() != k_users || powers.len() != k_users {
            return Err(Error::Dimension(format!(
                "{} users, {} beamformers, {} powers",
                k_users,
                beamformers.len(),
                powers.len()
            )));
        }
        if !(noise > 0.0) {
            return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
        }
        let mut a = Vec::with_capacity(k_users);
        let mut b = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let (ak, bk): (Vec<_>, Vec<_>) = (0..k_users)
                .map(|i| reflected_coefficients(channels, beamformers.get(k), i))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            a.push(ak);
            b.push(bk);
        }
        Ok(Self { a, b, powers: powers.to_vec(), noise })
    }

    pub fn users(&self) -> usize {
        self.powers.len()
    }

    pub fn elements(&self) -> usize {
        self.a.first().and_then(|row| row.first()).map_or(0, |v| v.len())
    }

    /// SINR of user `k` at an arbitrary (not necessarily unit-modulus) `theta`.
    pub fn sinr(&self, k: usize, theta: &ComplexVec) -> f64 {
        let mut interference = self.noise;
        let mut signal = 0.0;
        for i in 0..self.users() {
            let g = (theta.dotc(&self.a[k][i]) + self.b[k][i]).norm_sqr() * self.powers[i];
            if i == k {
                signal = g;
            } else {
                interference += g;
            }
        }
        signal / interference
    }

    pub fn sinrs(&self, theta: &ComplexVec) -> Vec<f64> {
        (0..self.users()).map(|k| self.sinr(k, theta)).collect()
    }

    /// `p_k (‖a_{k,k}‖₁ + |b_{k,k}|)² / σ²`, an upper bound on `SINR_k` over
    /// unit-modulus vectors.
    pub fn sinr_upper_bound(&self, k: usize) -> f64 {
        let amp = self.a[k][k].iter().map(|z| z.norm()).sum::<f64>() + self.b[k][k].norm();
        self.powers[k] * amp * amp / self.noise
    }

    /// Quadratic-constraint data for every user at SINR targets `gammas`.
    pub fn qcqp(&self, gammas: &[f64]) -> Result<Vec<QcqpData>> {
        if gammas.len() != self.users() {
            return Err(Error::Dimension(format!("{} targets for {} users", gammas.len(), self.users())));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!("SINR targets must be finite and nonnegative, got {g}")));
        }
        Ok((0..self.users()).map(|k| self.qcqp_for(k, gammas[k])).collect())
    }

    fn qcqp_for(&self, k: usize, gamma: f64) -> QcqpData {
        let m = self.elements();
        let mut a_mat = ComplexMat::zeros(m, m);
        let mut b_vec = ComplexVec::zeros(m);
        let akk = &self.a[k][k];
        let bkk = self.b[k][k];
        let pk = self.powers[k];
        a_mat -= (akk * akk.adjoint()) * Complex64::new(pk, 0.0);
        b_vec += akk * (bkk.conj() * pk);
        let mut tau = bkk.norm_sqr() * pk - gamma * self.noise;
        for i in (0..self.users()).filter(|&i| i != k) {
            let aki = &self.a[k][i];
            let bki = self.b[k][i];
            let pi = self.powers[i];
            a_mat += (aki * aki.adjoint()) * Complex64::new(gamma * pi, 0.0);
            b_vec -= aki * (bki.conj() * (gamma * pi));
            tau -= gamma * bki.norm_sqr() * pi;
        }
        QcqpData {
            user: k,
            gamma,
            a: self.a[k].clone(),
            b: self.b[k].clone(),
            powers: self.powers.clone(),
            noise: self.noise,
            a_mat,
            b_vec,
            tau,
        }
    }
}

/// SINR constraint of one user written as `qᴴ A q - 2 Re{bᴴ q} <= τ`.
#[derive(Debug, Clone)]
pub struct QcqpData {
    pub user: usize,
    pub gamma: f64,
    /// `a_{k,i}` for every `i`.
    pub a: Vec<ComplexVec>,
    /// `b_{k,i}` for every `i`.
    pub b: Vec<Complex64>,
    pub powers: Vec<f64>,
    pub noise: f64,
    /// `γ Σ_{i≠k} p_i a_{k,i} a_{k,i}ᴴ - p_k a_{k,k} a_{k,k}ᴴ`
    pub a_mat: ComplexMat,
    /// `p_k a_{k,k} b*_{k,k} - γ Σ_{i≠k} p_i a_{k,i} b*_{k,i}`
    pub b_vec: ComplexVec,
    /// `p_k |b_{k,k}|² - γ Σ_{i≠k} p_i |b_{k,i}|² - γ σ²`
    pub tau: f64,
}

impl QcqpData {
    /// `qᴴ A q - 2 Re{bᴴ q} - τ`; nonpositive exactly when the constraint holds.
    pub fn constraint_value(&self, q: &ComplexVec) -> f64 {
        let quad = q.dotc(&(&self.a_mat * q)).re;
        quad - 2.0 * self.b_vec.dotc(q).re - self.tau
    }

    /// The raw SINR ratio at `q`.
    pub fn sinr(&self, q: &ComplexVec) -> f64 {
        let k = self.user;
        let mut interference = self.noise;
        let mut signal = 0.0;
        for (i, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let g = (q.dotc(a) + b).norm_sqr() * self.powers[i];
            if i == k {
                signal = g;
            } else {
                interference += g;
            }
        }
        signal / interference
    }
}

/// Builds the constraint data of every user for beamformers `ws` and SINR targets `gammas`.
pub fn build_qcqp(
    channels: &ChannelSet,
    ws: &BeamformerSet,
    powers: &[f64],
    noise: f64,
    gammas: &[f64],
) -> Result<Vec<QcqpData>> {
    ReflectionCoefficients::new(channels, ws, powers, noise)?.qcqp(gammas)
}

/// `χ(μ) = Σ λ_m |(ζ̃_m + μ b̃_m)/(1 + μ λ_m)|² - 2 Re{Σ b̃*_m (ζ̃_m + μ b̃_m)/(1 + μ λ_m)} - τ`.
pub fn chi(mu: f64, lambda: &[f64], zeta_t: &ComplexVec, b_t: &ComplexVec, tau: f64) -> Result<f64> {
    let mut acc = -tau;
    for (m, &lam) in lambda.iter().enumerate() {
        let den = 1.0 + mu * lam;
        if den == 0.0 {
            return Err(Error::Pole(mu));
        }
        let q = (zeta_t[m] + b_t[m] * mu) / den;
        acc += lam * q.norm_sqr() - 2.0 * (b_t[m].conj() * q).re;
    }
    Ok(acc)
}

/// `χ'(μ) = -2 Σ |b̃_m - λ_m ζ̃_m|² / (1 + μ λ_m)³`.
pub fn chi_prime(mu: f64, lambda: &[f64], zeta_t: &ComplexVec, b_t: &ComplexVec) -> Result<f64> {
    let mut acc = 0.0;
    for (m, &lam) in lambda.iter().enumerate() {
        let den = 1.0 + mu * lam;
        if den == 0.0 {
            return Err(Error::Pole(mu));
        }
        acc -= 2.0 * (b_t[m] - zeta_t[m] * lam).norm_sqr() / (den * den * den);
    }
    Ok(acc)
}

/// Projection onto one user's SINR constraint set, with the eigendecomposition
/// of `A` computed once and reused across calls.
///
/// Internally `A`, `b` and `τ` are divided by the spectral radius of `A` (or
/// `‖b‖` when `A = 0`), which leaves the constraint set unchanged.
#[derive(Debug, Clone)]
pub struct QProjector {
    user: usize,
    lambda: Vec<f64>,
    vectors: ComplexMat,
    b_t: ComplexVec,
    tau: f64,
}

impl QProjector {
    pub fn new(data: &QcqpData) -> Result<Self> {
        let eig = hermitian_eig(&data.a_mat)?;
        let radius = eig.min().abs().max(eig.max().abs());
        let scale = if radius > 0.0 {
            radius
        } else {
            data.b_vec.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(data.tau.abs())
        };
        let scale = if scale > 0.0 { scale } else { 1.0 };
        // Rank-deficient A leaves round-off eigenvalues; those are zeros.
        let lambda = eig
            .values
            .iter()
            .map(|&l| {
                let l = l / scale;
                if l.abs() < 1e-12 {
                    0.0
                } else {
                    l
                }
            })
            .collect();
        let b_t = eig.vectors.adjoint() * &data.b_vec / Complex64::new(scale, 0.0);
        Ok(Self { user: data.user, lambda, vectors: eig.vectors, b_t, tau: data.tau / scale })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Eigenbasis coordinates `(ζ̃, b̃, τ)` in the normalized scale.
    pub fn transformed(&self, zeta: &ComplexVec) -> (ComplexVec, ComplexVec, f64) {
        (self.vectors.adjoint() * zeta, self.b_t.clone(), self.tau)
    }

    /// Multiplier interval `[0, hi)` on which `I + μΛ ⪰ 0`; `None` means unbounded.
    pub fn mu_upper(&self) -> Option<f64> {
        let lmin = self.lambda.first().copied().unwrap_or(0.0);
        (lmin < 0.0).then(|| -1.0 / lmin)
    }

    fn solution(&self, mu: f64, zeta_t: &ComplexVec) -> ComplexVec {
        let q_t =
            ComplexVec::from_fn(self.lambda.len(), |m, _| (zeta_t[m] + self.b_t[m] * mu) / (1.0 + mu * self.lambda[m]));
        &self.vectors * q_t
    }

    /// Closest point to `zeta` satisfying the constraint.
    pub fn project(&self, zeta: &ComplexVec) -> Result<ComplexVec> {
        let zeta_t = self.vectors.adjoint() * zeta;
        let f = |mu: f64| chi(mu, &self.lambda, &zeta_t, &self.b_t, self.tau).unwrap_or(f64::NEG_INFINITY);
        let df = |mu: f64| chi_prime(mu, &self.lambda, &zeta_t, &self.b_t).unwrap_or(f64::NEG_INFINITY);

        let at_zero = f(0.0);
        if at_zero <= 0.0 {
            return Ok(zeta.clone());
        }

        let hi = match self.mu_upper() {
            Some(pole) => {
                let near =
                    [1e-10, 1e-13, 1e-16].iter().map(|eps| pole * (1.0 - eps)).find(|&mu| mu > 0.0 && f(mu) < 0.0);
                match near {
                    Some(mu) => mu,
                    None => return self.hard_case(pole, &zeta_t),
                }
            }
            None => {
                let mut mu = 1.0;
                while f(mu) >= 0.0 {
                    mu *= 4.0;
                    if mu > 1e40 {
                        return Err(Error::Infeasible(self.user));
                    }
                }
                mu
            }
        };
        let f_tol = 1e-13 * (1.0 + self.tau.abs());
        let x_tol = 4.0 * f64::EPSILON * hi;
        let mu = find_root_safeguarded(f, df, Bracket::new(0.0, hi)?, x_tol, f_tol)?;
        Ok(self.solution(mu, &zeta_t))
    }

    /// The root sits at the pole: the component along the most negative
    /// eigenvector is free and is placed on the constraint circle closest to `ζ̃`.
    fn hard_case(&self, pole: f64, zeta_t: &ComplexVec) -> Result<ComplexVec> {
        let lmin = self.lambda[0];
        let mut q_t = ComplexVec::zeros(self.lambda.len());
        let mut rest = 0.0;
        for m in 1..self.lambda.len() {
            let lam = self.lambda[m];
            let qm = (zeta_t[m] + self.b_t[m] * pole) / (1.0 + pole * lam);
            rest += lam * qm.norm_sqr() - 2.0 * (self.b_t[m].conj() * qm).re;
            q_t[m] = qm;
        }
        let target = self.tau - rest;
        let center = self.b_t[0] / lmin;
        let r2 = (target + self.b_t[0].norm_sqr() / lmin) / lmin;
        if !(r2 >= 0.0) {
            return Err(Error::Infeasible(self.user));
        }
        let offset = zeta_t[0] - center;
        let dir = if offset.norm() > 0.0 { offset / offset.norm() } else { Complex64::new(1.0, 0.0) };
        q_t[0] = center + dir * r2.sqrt();
        Ok(&self.vectors * q_t)
    }
}

/// Projects `zeta` onto the constraint set of `data`.
pub fn q_update(zeta: &ComplexVec, data: &QcqpData) -> Result<ComplexVec> {
    QProjector::new(data)?.project(zeta)
}
