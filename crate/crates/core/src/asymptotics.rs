//! Normal-approximation formulas behind the bounds: Berry-Esseen gap,
//! product-mixture total-variation estimate, key-length and rate
//! thresholds, the adversary's threshold-test error bounds, and the
//! Bhattacharyya machinery of the no-absolute-continuity example.

use serde::Serialize;

use crate::bounds::{inner_bound_point, MaskingProblem};
use crate::channel::{mutual_information, Dmc, SparseInput};
use crate::error::{Error, Result};
use crate::normal::std_normal_cdf;
use crate::probdist::{bhattacharyya, omega, AdversaryMoments, Distribution};

/// Inputs to the Berry-Esseen deviation bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BeParams {
    pub n: usize,
    /// Average variance of the summands.
    pub sigma2_bar: f64,
    /// Average third absolute central moment.
    pub t_bar: f64,
}

/// Uniform CDF deviation bound 6 t_bar / (sigma2_bar^{3/2} sqrt(n)).
pub fn berry_esseen_gap(p: BeParams) -> Result<f64> {
    if !(p.sigma2_bar > 0.0) {
        return Err(Error::DomainError(format!(
            "sigma2_bar must be positive, got {}",
            p.sigma2_bar
        )));
    }
    if !(p.t_bar >= 0.0) || !p.t_bar.is_finite() {
        return Err(Error::DomainError(format!(
            "t_bar must be finite and nonnegative, got {}",
            p.t_bar
        )));
    }
    if p.n == 0 {
        return Err(Error::DomainError("n must be at least 1".into()));
    }
    Ok(6.0 * p.t_bar / (p.sigma2_bar.powf(1.5) * (p.n as f64).sqrt()))
}

/// Leading term of the total variation between the two n-fold induced
/// product mixtures: 2 Phi(sqrt(Omega(gamma1, gamma2)) / 2) - 1.
pub fn tv_product_mixture_estimate(
    gamma1: f64,
    gamma2: f64,
    q0: &Distribution,
    q1b: &Distribution,
    q2b: &Distribution,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::DomainError("n must be at least 1".into()));
    }
    let om = omega(gamma1, gamma2, q0, q1b, q2b)?;
    Ok(2.0 * std_normal_cdf(0.5 * om.sqrt()) - 1.0)
}

/// Minimum of log|M| + log|K| (nats) for the soft-covering step:
/// (1 + kappa) sqrt(n) max_s gamma_s D(W_s || Q0 | Pbar_s).
pub fn key_length_threshold(
    prob: &MaskingProblem,
    gamma1: f64,
    gamma2: f64,
    pbar1: &Distribution,
    pbar2: &Distribution,
    kappa: f64,
    n: usize,
) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::DomainError(format!(
            "kappa must be nonnegative, got {kappa}"
        )));
    }
    let pt = inner_bound_point(prob, gamma1, gamma2, pbar1, pbar2)?;
    let max_weighted = pt.weighted_kl[0].max(pt.weighted_kl[1]);
    Ok((1.0 + kappa) * (n as f64).sqrt() * max_weighted)
}

/// Per-state decodable-rate threshold: n I(P, W) - n^{1/3}, clamped at 0.
/// The caller takes the minimum over states.
pub fn rate_threshold(n: usize, sparse: &SparseInput, w: &Dmc) -> Result<f64> {
    let p = sparse.input_distribution();
    let i = mutual_information(&p, w)?;
    Ok((n as f64 * i - (n as f64).cbrt()).max(0.0))
}

/// Adversary's threshold test: weight range of the codewords, the phi mix,
/// and the acceptance threshold tau.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdversaryDesign {
    pub phi: f64,
    pub tau: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    pub n: usize,
}

impl AdversaryDesign {
    /// Builds the design with the canonical threshold
    /// tau = (n mu_low / 2)(D1(phi) + D2(phi)).
    pub fn new(
        phi: f64,
        mu_low: f64,
        mu_high: f64,
        n: usize,
        moments: &AdversaryMoments,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::PhiOutOfRange(phi));
        }
        for mu in [mu_low, mu_high] {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::MuOutOfRange(mu));
            }
        }
        if mu_low > mu_high {
            return Err(Error::DomainError(format!(
                "mu_low {mu_low} exceeds mu_high {mu_high}"
            )));
        }
        let tau = (n as f64 * mu_low / 2.0) * (moments.d1 + moments.d2);
        Ok(Self {
            phi,
            tau,
            mu_low,
            mu_high,
            n,
        })
    }
}

/// Upper bounds on the false-alarm and missed-detection probabilities of
/// the threshold test, clamped to [0, 1].
pub fn adversary_error_bounds(
    design: &AdversaryDesign,
    moments: &AdversaryMoments,
) -> Result<(f64, f64)> {
    let d_gap = moments.d1 - moments.d2;
    // Identical-state inputs leave both the gap and the variance at
    // rounding noise; treat that as degenerate rather than dividing by it.
    if d_gap <= 0.0 || moments.delta <= 1e-14 {
        return Err(Error::DegenerateMoments {
            d_gap,
            delta: moments.delta,
        });
    }
    let sqrt_n = (design.n as f64).sqrt();
    let main = 1.0 - std_normal_cdf(0.5 * design.mu_low * sqrt_n * d_gap / moments.delta.sqrt());
    let scale = sqrt_n * design.mu_low * design.mu_high * d_gap
        / (4.0 * (2.0 * std::f64::consts::PI * moments.delta.powi(3)).sqrt());
    let alpha = (main + scale * moments.gamma1.abs()).clamp(0.0, 1.0);
    let beta = (main + scale * moments.gamma2.abs()).clamp(0.0, 1.0);
    Ok((alpha, beta))
}

/// Hypothesis-test lower bound on total variation: max(0, 1 - alpha - beta).
pub fn tv_lower_from_test(alpha: f64, beta: f64) -> Result<f64> {
    for v in [alpha, beta] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::DomainError(format!(
                "error probabilities must lie in [0,1], got {v}"
            )));
        }
    }
    Ok((1.0 - alpha - beta).max(0.0))
}

/// Total-variation bound on n-fold products via the Bhattacharyya
/// coefficient: sqrt(1 - F(q1, q2)^{2n}).
pub fn bhattacharyya_tv_bound(q1: &Distribution, q2: &Distribution, n: usize) -> Result<f64> {
    let f = bhattacharyya(q1, q2)?;
    Ok((1.0 - f.powi(2 * n as i32)).max(0.0).sqrt())
}

/// Leading term of the achievable throughput without absolute continuity:
/// (sqrt(ln(1/(1-delta))) / 2) sqrt(n) ln n, in nats over n channel uses.
pub fn nonac_throughput_bound(delta: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DomainError(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if n < 2 {
        return Err(Error::DomainError(format!("n must be at least 2, got {n}")));
    }
    let nf = n as f64;
    Ok(((1.0 / (1.0 - delta)).ln().sqrt() / 2.0) * nf.sqrt() * nf.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{validate_compound, Dmc};
    use crate::normal::phi_inv;
    use crate::probdist::adversary_moments;

    fn ternary_problem(delta: f64) -> MaskingProblem {
        let third = 1.0 / 3.0;
        let w1 = Dmc::from_raw(vec![vec![third, third, third], vec![0.5, 0.25, 0.25]]).unwrap();
        let w2 = Dmc::from_raw(vec![vec![third, third, third], vec![0.25, 0.5, 0.25]]).unwrap();
        MaskingProblem::new(validate_compound(w1, w2).unwrap(), delta, 0.1).unwrap()
    }

    fn ternary_rows() -> (Distribution, Distribution, Distribution) {
        let third = 1.0 / 3.0;
        (
            Distribution::new(vec![0.5, 0.25, 0.25]).unwrap(),
            Distribution::new(vec![0.25, 0.5, 0.25]).unwrap(),
            Distribution::new(vec![third, third, third]).unwrap(),
        )
    }

    #[test]
    fn berry_esseen_examples() {
        let gap = berry_esseen_gap(BeParams {
            n: 36,
            sigma2_bar: 1.0,
            t_bar: 1.0,
        })
        .unwrap();
        assert!((gap - 1.0).abs() < 1e-15);
        assert_eq!(
            berry_esseen_gap(BeParams {
                n: 100,
                sigma2_bar: 2.0,
                t_bar: 0.0
            })
            .unwrap(),
            0.0
        );
        let g1 = berry_esseen_gap(BeParams {
            n: 50,
            sigma2_bar: 1.3,
            t_bar: 2.0,
        })
        .unwrap();
        let g2 = berry_esseen_gap(BeParams {
            n: 100,
            sigma2_bar: 1.3,
            t_bar: 2.0,
        })
        .unwrap();
        assert!((g1 / g2 - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(berry_esseen_gap(BeParams {
            n: 10,
            sigma2_bar: 0.0,
            t_bar: 1.0
        })
        .is_err());
    }

    #[test]
    fn tv_estimate_examples() {
        let (q1, q2, q0) = ternary_rows();
        // Identical mixtures give zero.
        let z = tv_product_mixture_estimate(0.7, 0.7, &q0, &q1, &q1, 100).unwrap();
        assert!(z.abs() < 1e-8);
        // The inner-bound design saturates the budget.
        let g = 0.827429;
        let tv = tv_product_mixture_estimate(g, g, &q0, &q1, &q2, 100).unwrap();
        assert!((tv - 0.2).abs() < 1e-5, "tv = {tv}");
    }

    #[test]
    fn tv_estimate_constraint_inversion() {
        let (q1, q2, q0) = ternary_rows();
        // Scale gammas so Omega = (2 phi_inv((1+delta)/2))^2 exactly.
        for &delta in &[0.1, 0.5, 0.9] {
            let target = (2.0 * phi_inv((1.0 + delta) / 2.0).unwrap()).powi(2);
            let base = omega(1.0, 1.0, &q0, &q1, &q2).unwrap();
            let scale = (target / base).sqrt();
            let tv = tv_product_mixture_estimate(scale, scale, &q0, &q1, &q2, 10).unwrap();
            assert!((tv - delta).abs() < 1e-12, "delta = {delta}");
        }
    }

    #[test]
    fn key_length_ternary_example() {
        let prob = ternary_problem(0.2);
        let pbar = Distribution::point_mass(1, 2);
        let g = 0.827429;
        let t = key_length_threshold(&prob, g, g, &pbar, &pbar, 0.1, 10_000).unwrap();
        assert!((t - 5.360140).abs() < 1e-4, "threshold = {t}");
        let t0 = key_length_threshold(&prob, g, g, &pbar, &pbar, 0.0, 10_000).unwrap();
        assert!((t0 * 1.1 - t).abs() < 1e-9);
    }

    #[test]
    fn rate_threshold_examples() {
        let w = Dmc::from_raw(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // mu = 0 gives zero information, clamped threshold 0.
        let s = SparseInput::new(0.0, Distribution::point_mass(1, 2), 0).unwrap();
        assert_eq!(rate_threshold(64, &s, &w).unwrap(), 0.0);
        // Noiseless binary rows at mu = 0.5: I = h_b(1/2) = ln 2.
        let s = SparseInput::new(0.5, Distribution::point_mass(1, 2), 0).unwrap();
        let t = rate_threshold(64, &s, &w).unwrap();
        let expected = 64.0 * std::f64::consts::LN_2 - 4.0;
        assert!((t - expected).abs() < 1e-12);
    }

    #[test]
    fn rate_threshold_sqrt_law_ratio() {
        // With mu = gamma/sqrt(n) the information term n I(P, W) tracks
        // gamma sqrt(n) kl; gamma is large enough that the n^{1/3}
        // correction does not swallow the threshold.
        let prob = ternary_problem(0.2);
        let g = 5.0;
        let n = 1_000_000usize;
        let mu = g / (n as f64).sqrt();
        let s = SparseInput::new(mu, Distribution::point_mass(1, 2), 0).unwrap();
        let t = rate_threshold(n, &s, prob.ch.w1()).unwrap();
        assert!(t > 0.0);
        let info_part = t + (n as f64).cbrt();
        let ideal = g * (n as f64).sqrt() * 0.0588915;
        let ratio = info_part / ideal;
        assert!((ratio - 1.0).abs() < 0.05, "ratio = {ratio}");
    }

    #[test]
    fn adversary_bounds_trivial_cases() {
        let (q1, q2, q0) = ternary_rows();
        let m = adversary_moments(0.5, &q1, &q2, &q0).unwrap();
        // Zero-weight codewords are undetectable either way.
        let d = AdversaryDesign::new(0.5, 0.0, 0.0, 100, &m).unwrap();
        let (a, b) = adversary_error_bounds(&d, &m).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert_eq!(d.tau, 0.0);
    }

    #[test]
    fn adversary_bounds_inversion() {
        // Gamma corrections zeroed, argument forced to 2 phi_inv(0.6).
        let (q1, q2, q0) = ternary_rows();
        let mut m = adversary_moments(0.5, &q1, &q2, &q0).unwrap();
        m.gamma1 = 0.0;
        m.gamma2 = 0.0;
        let n = 10_000usize;
        let target = 2.0 * phi_inv(0.6).unwrap();
        let mu = target * m.delta.sqrt() / ((n as f64).sqrt() * (m.d1 - m.d2));
        let d = AdversaryDesign::new(0.5, mu, mu, n, &m).unwrap();
        let (a, b) = adversary_error_bounds(&d, &m).unwrap();
        assert!((a - 0.4).abs() < 1e-12, "alpha = {a}");
        assert!((b - 0.4).abs() < 1e-12);
    }

    #[test]
    fn adversary_bounds_degenerate() {
        let (q1, _q2, q0) = ternary_rows();
        // Identical states: d1 - d2 = 0.
        let m = adversary_moments(0.5, &q1, &q1, &q0).unwrap();
        let d = AdversaryDesign::new(0.5, 0.1, 0.1, 100, &m).unwrap();
        assert!(matches!(
            adversary_error_bounds(&d, &m),
            Err(Error::DegenerateMoments { .. })
        ));
    }

    #[test]
    fn adversary_tv_plugthrough_ternary() {
        // Symmetric design at the inner-bound gamma: 1 - alpha - beta
        // approaches delta from below as n grows.
        let (q1, q2, q0) = ternary_rows();
        let m = adversary_moments(0.5, &q1, &q2, &q0).unwrap();
        let g = 0.827429;
        let mut prev_gap = f64::INFINITY;
        for &n in &[10_000usize, 1_000_000, 100_000_000] {
            let mu = g / (n as f64).sqrt();
            let d = AdversaryDesign::new(0.5, mu, mu, n, &m).unwrap();
            let (a, b) = adversary_error_bounds(&d, &m).unwrap();
            let tv = tv_lower_from_test(a, b).unwrap();
            let gap = (0.2 - tv).abs();
            assert!(gap < prev_gap + 1e-12, "gap not shrinking at n={n}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-3, "final gap {prev_gap}");
    }

    #[test]
    fn tv_lower_examples() {
        assert_eq!(tv_lower_from_test(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(tv_lower_from_test(0.0, 0.0).unwrap(), 1.0);
        assert!((tv_lower_from_test(0.3, 0.4).unwrap() - 0.3).abs() < 1e-15);
        assert!(tv_lower_from_test(-0.1, 0.5).is_err());
        assert!(tv_lower_from_test(0.1, 1.5).is_err());
    }

    #[test]
    fn bhattacharyya_bound_examples() {
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        for n in [1usize, 5, 50] {
            assert_eq!(bhattacharyya_tv_bound(&q, &q, n).unwrap(), 0.0);
        }
        let a = Distribution::new(vec![1.0, 0.0]).unwrap();
        let b = Distribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(bhattacharyya_tv_bound(&a, &b, 3).unwrap(), 1.0);
    }

    #[test]
    fn bhattacharyya_bound_fig5_limit() {
        // Sparse mixtures of the disjoint-support marginals with
        // gamma = 2 sqrt(ln(1/(1-delta))): the n-fold bound tends to
        // sqrt(delta) = sqrt(1 - e^{-gamma^2/4}).
        let delta = 0.2f64;
        let gamma = 2.0 * (1.0 / (1.0 - delta)).ln().sqrt();
        let q1m = |mu: f64| {
            Distribution::new(vec![0.5 * (1.0 - mu), 0.5, 0.5 * mu]).unwrap()
        };
        let q2m = |mu: f64| {
            Distribution::new(vec![
                0.5 * (1.0 - mu) + 0.5 * mu,
                0.5 * (1.0 - mu),
                0.5 * mu,
            ])
            .unwrap()
        };
        let n = 1_000_000usize;
        let mu = gamma / (n as f64).sqrt();
        let bound = bhattacharyya_tv_bound(&q1m(mu), &q2m(mu), n).unwrap();
        assert!((bound - delta.sqrt()).abs() < 0.01, "bound = {bound}");
        assert!((delta.sqrt() - 0.447214).abs() < 1e-6);
    }

    #[test]
    fn nonac_examples() {
        let v = nonac_throughput_bound(0.2, 10_000).unwrap();
        assert!((v - 217.5394).abs() < 1e-3, "v = {v}");
        assert!(nonac_throughput_bound(1e-12, 10_000).unwrap() < 1e-3);
        // Ratio to sqrt(n) ln n is constant in n.
        let c = (1.0f64 / 0.8).ln().sqrt() / 2.0;
        for &n in &[100usize, 10_000, 1_000_000] {
            let nf = n as f64;
            let r = nonac_throughput_bound(0.2, n).unwrap() / (nf.sqrt() * nf.ln());
            assert!((r - c).abs() < 1e-12);
        }
        assert!(nonac_throughput_bound(0.2, 1).is_err());
        assert!(nonac_throughput_bound(0.0, 100).is_err());
    }
}
