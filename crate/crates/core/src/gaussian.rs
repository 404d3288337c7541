//! Closed forms and quadrature oracles for the binary-antipodal Gaussian
//! setup: off symbol 0, active symbols +1 and -1 under the two states,
//! additive noise N(0, sigma^2).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::phi_inv;

/// Noise variance of the Gaussian setup.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianSetup {
    pub sigma2: f64,
}

impl GaussianSetup {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::DomainError(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }
}

/// Single-letter information quantities of the Gaussian setup.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianQuantities {
    pub chi2: f64,
    pub rho: f64,
    pub kl: f64,
    pub psi: f64,
}

/// chi2 = e^{1/s2} - 1, rho = e^{-1/s2} - 1, kl = 1/(2 s2),
/// psi = 2(e^{1/s2} - e^{-1/s2}).
pub fn gaussian_closed_form(setup: GaussianSetup) -> GaussianQuantities {
    let inv = 1.0 / setup.sigma2;
    GaussianQuantities {
        chi2: inv.exp() - 1.0,
        rho: (-inv).exp() - 1.0,
        kl: 0.5 * inv,
        psi: 2.0 * (inv.exp() - (-inv).exp()),
    }
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 60;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    if depth == 0 {
        *worst = worst.max(err.abs());
        return left + right + err / 15.0;
    }
    adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut worst = 0.0;
    let value = adaptive_step(&f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH, &mut worst);
    if worst > 0.0 {
        return Err(Error::QuadratureNonConvergence(worst));
    }
    Ok(value)
}

fn normal_pdf(x: f64, mean: f64, sigma2: f64) -> f64 {
    (-0.5 * (x - mean) * (x - mean) / sigma2).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
}

/// Evaluates chi2, rho, and KL by numerical integration of the density
/// ratios over [-(10 sigma + 10), 10 sigma + 10].
pub fn gaussian_quadrature_oracle(setup: GaussianSetup) -> Result<GaussianQuantities> {
    let s2 = setup.sigma2;
    let half = 10.0 * s2.sqrt() + 10.0;
    let q0 = move |x: f64| normal_pdf(x, 0.0, s2);
    let q1 = move |x: f64| normal_pdf(x, 1.0, s2);
    let q2 = move |x: f64| normal_pdf(x, -1.0, s2);
    let chi2 = integrate(
        |x| {
            let d = q1(x) - q0(x);
            d * d / q0(x)
        },
        -half,
        half,
        QUAD_TOL,
    )?;
    let rho = integrate(
        |x| (q1(x) - q0(x)) * (q2(x) - q0(x)) / q0(x),
        -half,
        half,
        QUAD_TOL,
    )?;
    let kl = integrate(
        |x| {
            let p = q1(x);
            if p <= 0.0 {
                0.0
            } else {
                p * (p / q0(x)).ln()
            }
        },
        -half,
        half,
        QUAD_TOL,
    )?;
    Ok(GaussianQuantities {
        chi2,
        rho,
        kl,
        psi: 2.0 * chi2 - 2.0 * rho,
    })
}

/// KL of the state-2 branch (mean -1) against N(0, sigma^2) by quadrature;
/// the setup is symmetric so this must match the state-1 value.
pub fn gaussian_kl_negative_branch(setup: GaussianSetup) -> Result<f64> {
    let s2 = setup.sigma2;
    let half = 10.0 * s2.sqrt() + 10.0;
    integrate(
        |x| {
            let p = normal_pdf(x, -1.0, s2);
            if p <= 0.0 {
                0.0
            } else {
                p * (p / normal_pdf(x, 0.0, s2)).ln()
            }
        },
        -half,
        half,
        QUAD_TOL,
    )
}

/// Optimal throughput of the Gaussian setup, nats per sqrt(n):
/// L = phi_inv((1+delta)/2) / sqrt(2(e^{1/s2} - e^{-1/s2})) * (1/s2).
pub fn gaussian_optimal_throughput(setup: GaussianSetup, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DomainError(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let inv = 1.0 / setup.sigma2;
    let q = phi_inv((1.0 + delta) / 2.0)?;
    Ok(q / (2.0 * (inv.exp() - (-inv).exp())).sqrt() * inv)
}

/// Same throughput via the generic symmetric-optimality route
/// 2 phi_inv((1+delta)/2) * kl / sqrt(psi), from caller-supplied quantities.
pub fn gaussian_throughput_from_quantities(q: &GaussianQuantities, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DomainError(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    Ok(2.0 * phi_inv((1.0 + delta) / 2.0)? * q.kl / q.psi.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let q = gaussian_closed_form(GaussianSetup::new(1.0).unwrap());
        assert!((q.chi2 - 1.718282).abs() < 1e-6);
        assert!((q.rho - (-0.632121)).abs() < 1e-6);
        assert!((q.kl - 0.5).abs() < 1e-15);
        assert!((q.psi - 4.700805).abs() < 1e-6);
        let q = gaussian_closed_form(GaussianSetup::new(0.5).unwrap());
        assert!((q.chi2 - 6.389056).abs() < 1e-6);
        assert!((q.kl - 1.0).abs() < 1e-15);
        // Large variance kills every quantity.
        let q = gaussian_closed_form(GaussianSetup::new(1e12).unwrap());
        assert!(q.chi2 < 1e-11 && q.rho.abs() < 1e-11 && q.kl < 1e-12 && q.psi < 1e-11);
    }

    #[test]
    fn setup_domain() {
        assert!(GaussianSetup::new(0.0).is_err());
        assert!(GaussianSetup::new(-1.0).is_err());
        assert!(GaussianSetup::new(f64::NAN).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &s2 in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let setup = GaussianSetup::new(s2).unwrap();
            let cf = gaussian_closed_form(setup);
            let nq = gaussian_quadrature_oracle(setup).unwrap();
            assert!((cf.chi2 - nq.chi2).abs() < 1e-8, "chi2 at s2={s2}");
            assert!((cf.rho - nq.rho).abs() < 1e-8, "rho at s2={s2}");
            assert!((cf.kl - nq.kl).abs() < 1e-8, "kl at s2={s2}");
            assert!((cf.psi - nq.psi).abs() < 1e-8, "psi at s2={s2}");
        }
    }

    #[test]
    fn branch_symmetry() {
        for &s2 in &[0.5, 1.0, 4.0] {
            let setup = GaussianSetup::new(s2).unwrap();
            let plus = gaussian_quadrature_oracle(setup).unwrap().kl;
            let minus = gaussian_kl_negative_branch(setup).unwrap();
            assert!((plus - minus).abs() < 1e-9, "branches differ at s2={s2}");
        }
    }

    #[test]
    fn optimal_throughput_reference() {
        let setup = GaussianSetup::new(1.0).unwrap();
        let l = gaussian_optimal_throughput(setup, 0.2).unwrap();
        assert!((l - 0.1168503).abs() < 1e-6, "L = {l}");
        // Vanishes with delta.
        assert!(gaussian_optimal_throughput(setup, 1e-12).unwrap() < 1e-10);
        assert!(gaussian_optimal_throughput(setup, 0.0).is_err());
    }

    #[test]
    fn route_equivalence() {
        for &s2 in &[0.25, 0.5, 1.0, 2.0, 4.0, 25.0] {
            for &delta in &[0.05, 0.2, 0.5, 0.9] {
                let setup = GaussianSetup::new(s2).unwrap();
                let a = gaussian_optimal_throughput(setup, delta).unwrap();
                let b =
                    gaussian_throughput_from_quantities(&gaussian_closed_form(setup), delta)
                        .unwrap();
                assert!((a - b).abs() < 1e-12, "routes differ at s2={s2} delta={delta}");
            }
        }
    }

    #[test]
    fn throughput_monotone_decreasing_in_sigma2() {
        let mut prev = f64::INFINITY;
        let mut s2 = 1.0;
        while s2 <= 100.0 {
            let l = gaussian_optimal_throughput(GaussianSetup::new(s2).unwrap(), 0.2).unwrap();
            assert!(l < prev, "not decreasing at s2={s2}");
            prev = l;
            s2 += 1.0;
        }
        // Theta(1/sigma) tail: s2 -> 100*s2 shrinks L by about 10.
        let a = gaussian_optimal_throughput(GaussianSetup::new(100.0).unwrap(), 0.2).unwrap();
        let b = gaussian_optimal_throughput(GaussianSetup::new(10_000.0).unwrap(), 0.2).unwrap();
        let ratio = a / b;
        assert!((ratio - 10.0).abs() < 0.1, "tail ratio {ratio}");
    }
}
