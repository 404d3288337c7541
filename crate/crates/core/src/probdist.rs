//! Finite probability distributions and the divergence functionals used by
//! the bound computations: KL, chi-squared, total variation, Bhattacharyya,
//! the three-distribution correlation `rho`, and the adversary moment
//! quantities D1, D2, Delta, Gamma1, Gamma2.
//!
//! Conventions: all divergences are in nats; 0*ln(0) = 0; entries below
//! `SUPPORT_EPS` count as exact zeros for support checks.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Entries below this are treated as exact zeros for support purposes.
pub const SUPPORT_EPS: f64 = 1e-15;

/// Maximum deviation of the entry sum from 1 accepted on strict construction.
pub const SUM_TOL: f64 = 1e-12;

/// Maximum deviation the normalizing constructor will rescale away.
pub const NORMALIZE_TOL: f64 = 1e-9;

/// A finite probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Strict constructor: entries nonnegative, sum within `SUM_TOL` of 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::validate(&probs, SUM_TOL)?;
        Ok(Self { probs })
    }

    /// Rescales inputs whose sum deviates from 1 by at most `NORMALIZE_TOL`;
    /// rejects larger deviations.
    pub fn normalized(probs: Vec<f64>) -> Result<Self> {
        Self::validate(&probs, NORMALIZE_TOL)?;
        let sum: f64 = probs.iter().sum();
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(Self { probs })
    }

    fn validate(probs: &[f64], tol: f64) -> Result<()> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {p}, must be a nonnegative real"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, deviation exceeds {tol}"
            )));
        }
        Ok(())
    }

    pub fn point_mass(index: usize, len: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// True if the entry at `i` is an exact zero for support purposes.
    pub fn is_zero_at(&self, i: usize) -> bool {
        self.probs[i] < SUPPORT_EPS
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.probs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        Distribution::normalized(probs).map_err(serde::de::Error::custom)
    }
}

fn check_len(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(())
}

fn check_ac(p: &Distribution, q: &Distribution) -> Result<()> {
    check_len(p, q)?;
    for i in 0..p.len() {
        if !p.is_zero_at(i) && q.is_zero_at(i) {
            return Err(Error::AbsoluteContinuityViolation { index: i });
        }
    }
    Ok(())
}

/// D(p || q) in nats.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_ac(p, q)?;
    let mut sum = 0.0;
    for i in 0..p.len() {
        let pi = p.get(i);
        if pi >= SUPPORT_EPS {
            sum += pi * (pi / q.get(i)).ln();
        }
    }
    Ok(sum.max(0.0))
}

/// chi_2(p || q) = sum_i (p_i - q_i)^2 / q_i.
pub fn chi_squared(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_ac(p, q)?;
    let mut sum = 0.0;
    for i in 0..p.len() {
        let qi = q.get(i);
        if qi >= SUPPORT_EPS {
            let d = p.get(i) - qi;
            sum += d * d / qi;
        }
    }
    Ok(sum)
}

/// d_TV(p, q) = (1/2) sum_i |p_i - q_i|.
pub fn total_variation(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_len(p, q)?;
    let sum: f64 = (0..p.len()).map(|i| (p.get(i) - q.get(i)).abs()).sum();
    Ok(0.5 * sum)
}

/// Bhattacharyya coefficient F(p, q) = sum_i sqrt(p_i q_i).
pub fn bhattacharyya(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_len(p, q)?;
    Ok((0..p.len()).map(|i| (p.get(i) * q.get(i)).sqrt()).sum())
}

/// rho(q1, q2, q0) = E_{q0}[(q1/q0 - 1)(q2/q0 - 1)].
pub fn rho_correlation(q1: &Distribution, q2: &Distribution, q0: &Distribution) -> Result<f64> {
    check_ac(q1, q0)?;
    check_ac(q2, q0)?;
    let mut sum = 0.0;
    for i in 0..q0.len() {
        let q0i = q0.get(i);
        if q0i >= SUPPORT_EPS {
            sum += q0i * (q1.get(i) / q0i - 1.0) * (q2.get(i) / q0i - 1.0);
        }
    }
    Ok(sum)
}

/// Psi = E_{q0}[((q1 - q2)/q0)^2], computed by direct summation.
pub fn psi_direct(q1: &Distribution, q2: &Distribution, q0: &Distribution) -> Result<f64> {
    check_ac(q1, q0)?;
    check_ac(q2, q0)?;
    let mut sum = 0.0;
    for i in 0..q0.len() {
        let q0i = q0.get(i);
        if q0i >= SUPPORT_EPS {
            let d = q1.get(i) - q2.get(i);
            sum += d * d / q0i;
        }
    }
    Ok(sum)
}

/// Omega(g1, g2; q0, q1b, q2b), the quadratic form governing the asymptotic
/// total variation between the two induced product outputs.
pub fn omega(
    g1: f64,
    g2: f64,
    q0: &Distribution,
    q1b: &Distribution,
    q2b: &Distribution,
) -> Result<f64> {
    if !(g1 > 0.0) || !(g2 > 0.0) {
        return Err(Error::NonPositiveGamma { gamma1: g1, gamma2: g2 });
    }
    let chi1 = chi_squared(q1b, q0)?;
    let chi2 = chi_squared(q2b, q0)?;
    let rho = rho_correlation(q1b, q2b, q0)?;
    Ok(g1 * g1 * chi1 + g2 * g2 * chi2 - 2.0 * g1 * g2 * rho)
}

/// The five scalar divergences the bound formulas consume, bundled.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DivergenceProfile {
    /// D(q1 || q0) in nats.
    pub kl_1: f64,
    /// D(q2 || q0) in nats.
    pub kl_2: f64,
    pub chi2_1: f64,
    pub chi2_2: f64,
    pub rho: f64,
    pub psi: f64,
}

impl DivergenceProfile {
    pub fn compute(q1: &Distribution, q2: &Distribution, q0: &Distribution) -> Result<Self> {
        Ok(Self {
            kl_1: kl_divergence(q1, q0)?,
            kl_2: kl_divergence(q2, q0)?,
            chi2_1: chi_squared(q1, q0)?,
            chi2_2: chi_squared(q2, q0)?,
            rho: rho_correlation(q1, q2, q0)?,
            psi: psi_direct(q1, q2, q0)?,
        })
    }
}

/// First, second, and third order moments of the adversary's per-symbol test
/// statistic T(y; phi).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdversaryMoments {
    pub phi: f64,
    /// Mean of T per active symbol under state 1.
    pub d1: f64,
    /// Mean of T per active symbol under state 2.
    pub d2: f64,
    /// Variance term Delta(phi) = E_{q0}[T^2].
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// D1, D2, Delta, Gamma1, Gamma2 at mixing weight `phi`.
pub fn adversary_moments(
    phi: f64,
    q1t: &Distribution,
    q2t: &Distribution,
    q0: &Distribution,
) -> Result<AdversaryMoments> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::PhiOutOfRange(phi));
    }
    check_ac(q1t, q0)?;
    check_ac(q2t, q0)?;
    let chi1 = chi_squared(q1t, q0)?;
    let chi2 = chi_squared(q2t, q0)?;
    let rho = rho_correlation(q1t, q2t, q0)?;
    let d1 = phi * chi1 - (1.0 - phi) * rho;
    let d2 = -(1.0 - phi) * chi2 + phi * rho;
    let delta =
        phi * phi * chi1 + (1.0 - phi) * (1.0 - phi) * chi2 - 2.0 * phi * (1.0 - phi) * rho;
    let mut gamma = [0.0; 2];
    for i in 0..q0.len() {
        let q0i = q0.get(i);
        if q0i < SUPPORT_EPS {
            continue;
        }
        let t = (phi * (q1t.get(i) - q0i) - (1.0 - phi) * (q2t.get(i) - q0i)) / q0i;
        gamma[0] += (q1t.get(i) - q0i) * t * t / q0i;
        gamma[1] += (q2t.get(i) - q0i) * t * t / q0i;
    }
    Ok(AdversaryMoments {
        phi,
        d1,
        d2,
        delta: delta.max(0.0),
        gamma1: gamma[0],
        gamma2: gamma[1],
    })
}

/// Per-symbol adversary test statistic T(y; phi); used by the simulator.
pub fn test_statistic(
    phi: f64,
    q1t: &Distribution,
    q2t: &Distribution,
    q0: &Distribution,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::PhiOutOfRange(phi));
    }
    check_ac(q1t, q0)?;
    check_ac(q2t, q0)?;
    let mut t = vec![0.0; q0.len()];
    for i in 0..q0.len() {
        let q0i = q0.get(i);
        if q0i >= SUPPORT_EPS {
            t[i] = (phi * (q1t.get(i) - q0i) - (1.0 - phi) * (q2t.get(i) - q0i)) / q0i;
        }
    }
    Ok(t)
}
