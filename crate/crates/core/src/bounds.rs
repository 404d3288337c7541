//! Inner bound, outer bound, and the optimality verdict for the
//! throughput-key region, together with grid-based numerical oracles for
//! both closed forms.
//!
//! All throughputs are in nats per sqrt(n). Degenerate denominators
//! (output-indistinguishable states) are reported as an infinity sentinel
//! with a `degenerate` flag instead of an error.

use serde::Serialize;

use crate::channel::{conditional_kl, output_distribution, CompoundChannel};
use crate::error::{Error, Result};
use crate::normal::phi_inv;
use crate::probdist::{kl_divergence, omega, Distribution, DivergenceProfile};

/// Tolerance for the KL-symmetry precondition of the optimality verdict.
pub const KL_SYMMETRY_TOL: f64 = 1e-9;

/// Compound channel plus masking and error budgets.
#[derive(Debug, Clone)]
pub struct MaskingProblem {
    pub ch: CompoundChannel,
    /// Total variation masking budget.
    pub delta: f64,
    /// Error budget; informational for the asymptotic bounds, used by the
    /// simulator's budget checks.
    pub epsilon: f64,
}

impl MaskingProblem {
    pub fn new(ch: CompoundChannel, delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::DomainError(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::DomainError(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        Ok(Self { ch, delta, epsilon })
    }

    /// 2 Phi^{-1}((1+delta)/2), the constraint radius.
    pub fn quantile_radius(&self) -> f64 {
        2.0 * phi_inv((1.0 + self.delta) / 2.0).expect("delta validated on construction")
    }

    /// Divergence profile of the single-letter distributions
    /// (Qtilde_1, Qtilde_2, Q0) for a binary-input channel.
    pub fn binary_profile(&self) -> Result<DivergenceProfile> {
        let (q1t, q2t) = self.active_rows()?;
        DivergenceProfile::compute(q1t, q2t, self.ch.q0())
    }

    /// The active-symbol output rows for a binary-input channel.
    pub fn active_rows(&self) -> Result<(&Distribution, &Distribution)> {
        if self.ch.input_len() != 2 {
            return Err(Error::NonBinaryInput(self.ch.input_len()));
        }
        let a1 = 1 - self.ch.off1();
        let a2 = 1 - self.ch.off2();
        Ok((self.ch.w1().row(a1), self.ch.w2().row(a2)))
    }
}

/// One point of the achievable (L, S) region.
#[derive(Debug, Clone, Serialize)]
pub struct InnerBoundPoint {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Throughput, nats per sqrt(n).
    pub l: f64,
    /// Key requirement, nats per sqrt(n).
    pub s: f64,
    pub omega_value: f64,
    /// Constraint slack: radius^2 - omega; nonnegative iff admissible.
    pub constraint_slack: f64,
    pub admissible: bool,
    /// Conditional divergences gamma_s * D(W_s || Q0 | Pbar_s).
    pub weighted_kl: [f64; 2],
}

/// Evaluates the achievable region at a caller-supplied (gamma, Pbar) design.
pub fn inner_bound_point(
    prob: &MaskingProblem,
    gamma1: f64,
    gamma2: f64,
    pbar1: &Distribution,
    pbar2: &Distribution,
) -> Result<InnerBoundPoint> {
    if !(gamma1 > 0.0) || !(gamma2 > 0.0) {
        return Err(Error::NonPositiveGamma { gamma1, gamma2 });
    }
    for (pbar, off) in [(pbar1, prob.ch.off1()), (pbar2, prob.ch.off2())] {
        if !pbar.is_zero_at(off) {
            return Err(Error::OffSymbolMassNonzero {
                index: off,
                mass: pbar.get(off),
            });
        }
    }
    let q0 = prob.ch.q0();
    let qbar1 = output_distribution(prob.ch.w1(), pbar1)?;
    let qbar2 = output_distribution(prob.ch.w2(), pbar2)?;
    let omega_value = omega(gamma1, gamma2, q0, &qbar1, &qbar2)?;
    let radius2 = prob.quantile_radius().powi(2);
    let d1 = gamma1 * conditional_kl(prob.ch.w1(), q0, pbar1)?;
    let d2 = gamma2 * conditional_kl(prob.ch.w2(), q0, pbar2)?;
    Ok(InnerBoundPoint {
        gamma1,
        gamma2,
        l: d1.min(d2),
        s: d1.max(d2) - d1.min(d2),
        omega_value,
        constraint_slack: radius2 - omega_value,
        admissible: omega_value <= radius2 + 1e-12,
        weighted_kl: [d1, d2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InnerBranch {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OuterBranch {
    U1,
    U2,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InnerBound {
    pub l: f64,
    pub branch: InnerBranch,
    /// Set when the two states are output-indistinguishable and the bound
    /// is the infinity sentinel.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OuterBound {
    pub u: f64,
    pub branch: OuterBranch,
    pub degenerate: bool,
}

const DEGENERATE_EPS: f64 = 1e-14;

/// Closed-form infinite-key inner bound for binary input alphabets.
pub fn inner_bound_infinite_key(prob: &MaskingProblem) -> Result<InnerBound> {
    let p = prob.binary_profile()?;
    let radius = prob.quantile_radius();
    let (chi1, chi2, rho) = (p.chi2_1, p.chi2_2, p.rho);
    let (kl1, kl2) = (p.kl_1, p.kl_2);
    if kl1 <= DEGENERATE_EPS || kl2 <= DEGENERATE_EPS {
        // One state is invisible through its active symbol; the min caps at 0.
        return Ok(InnerBound {
            l: 0.0,
            branch: InnerBranch::L1,
            degenerate: false,
        });
    }
    let threshold = (chi1 * kl2 / kl1).min(chi2 * kl1 / kl2);
    if rho < threshold {
        let radicand = chi1 * kl2 * kl2 - 2.0 * rho * kl1 * kl2 + chi2 * kl1 * kl1;
        if radicand <= DEGENERATE_EPS {
            return Ok(InnerBound {
                l: f64::INFINITY,
                branch: InnerBranch::L1,
                degenerate: true,
            });
        }
        Ok(InnerBound {
            l: radius * kl1 * kl2 / radicand.sqrt(),
            branch: InnerBranch::L1,
            degenerate: false,
        })
    } else {
        let denom = chi1 * chi2 - rho * rho;
        if denom <= DEGENERATE_EPS {
            return Ok(InnerBound {
                l: f64::INFINITY,
                branch: InnerBranch::L2,
                degenerate: true,
            });
        }
        let num = (chi1 * kl2 * kl2).min(chi2 * kl1 * kl1);
        Ok(InnerBound {
            l: radius * (num / denom).sqrt(),
            branch: InnerBranch::L2,
            degenerate: false,
        })
    }
}

/// Independent grid oracle for the inner bound: the constraint set
/// Omega(gamma) <= radius^2 is a centered ellipse, so the optimum of the
/// scale-monotone objective lies on its boundary; sweep boundary angles.
pub fn inner_bound_numeric_oracle(prob: &MaskingProblem, grid_resolution: usize) -> Result<f64> {
    let p = prob.binary_profile()?;
    let radius2 = prob.quantile_radius().powi(2);
    let (chi1, chi2, rho) = (p.chi2_1, p.chi2_2, p.rho);
    let (kl1, kl2) = (p.kl_1, p.kl_2);
    if kl1 <= DEGENERATE_EPS || kl2 <= DEGENERATE_EPS {
        return Ok(0.0);
    }
    // None marks a direction where the constraint quadratic vanishes,
    // letting gamma (and the throughput) grow without bound.
    let eval = |theta: f64| -> Option<f64> {
        let (c, s) = (theta.cos(), theta.sin());
        let quad = c * c * chi1 + s * s * chi2 - 2.0 * c * s * rho;
        if quad <= 1e-18 {
            return None;
        }
        let t = (radius2 / quad).sqrt();
        Some((t * c * kl1).min(t * s * kl2))
    };
    let mut best: f64 = 0.0;
    let mut best_theta = std::f64::consts::FRAC_PI_4;
    let mut center = std::f64::consts::FRAC_PI_4;
    let mut half_width = std::f64::consts::FRAC_PI_4;
    // Coarse sweep over (0, pi/2), then two refinement passes around the
    // argmax so the discretization error is far below the coarse step.
    for _pass in 0..3 {
        for i in 1..grid_resolution {
            let theta =
                center - half_width + 2.0 * half_width * i as f64 / grid_resolution as f64;
            if theta <= 0.0 || theta >= std::f64::consts::FRAC_PI_2 {
                continue;
            }
            match eval(theta) {
                None => return Ok(f64::INFINITY),
                Some(value) => {
                    if value > best {
                        best = value;
                        best_theta = theta;
                    }
                }
            }
        }
        center = best_theta;
        half_width = 2.0 * half_width / grid_resolution as f64;
    }
    Ok(best)
}

/// Converse bound at a single tilt parameter phi.
pub fn outer_bound_at_phi(prob: &MaskingProblem, phi: f64) -> Result<(f64, bool)> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::PhiOutOfRange(phi));
    }
    let p = prob.binary_profile()?;
    let (chi1, chi2, rho) = (p.chi2_1, p.chi2_2, p.rho);
    let ratio1 = if phi >= 1.0 {
        f64::INFINITY
    } else {
        phi / (1.0 - phi) * chi1
    };
    let ratio2 = if phi <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - phi) / phi * chi2
    };
    let condition_holds = rho <= ratio1.min(ratio2) + 1e-15;
    let delta_phi =
        phi * phi * chi1 + (1.0 - phi) * (1.0 - phi) * chi2 - 2.0 * phi * (1.0 - phi) * rho;
    let d_gap = phi * chi1 + (1.0 - phi) * chi2 - rho; // D1(phi) - D2(phi)
    let u = if d_gap <= DEGENERATE_EPS {
        f64::INFINITY
    } else {
        prob.quantile_radius() * delta_phi.max(0.0).sqrt() / d_gap * p.kl_1.max(p.kl_2)
    };
    Ok((u, condition_holds))
}

/// Closed-form minimum of the outer bound over phi.
pub fn outer_bound_min(prob: &MaskingProblem) -> Result<OuterBound> {
    let p = prob.binary_profile()?;
    let radius = prob.quantile_radius();
    let (chi1, chi2, rho) = (p.chi2_1, p.chi2_2, p.rho);
    let max_kl = p.kl_1.max(p.kl_2);
    if rho <= chi1.min(chi2) {
        let psi = chi1 + chi2 - 2.0 * rho;
        if psi <= DEGENERATE_EPS {
            return Ok(OuterBound {
                u: f64::INFINITY,
                branch: OuterBranch::U1,
                degenerate: true,
            });
        }
        Ok(OuterBound {
            u: radius / psi.sqrt() * max_kl,
            branch: OuterBranch::U1,
            degenerate: false,
        })
    } else {
        let denom = chi1 * chi2 - rho * rho;
        if denom <= DEGENERATE_EPS {
            return Ok(OuterBound {
                u: f64::INFINITY,
                branch: OuterBranch::U2,
                degenerate: true,
            });
        }
        Ok(OuterBound {
            u: radius * (chi1.min(chi2) / denom).sqrt() * max_kl,
            branch: OuterBranch::U2,
            degenerate: false,
        })
    }
}

/// The feasible phi interval of the outer-bound condition.
pub fn outer_phi_interval(prob: &MaskingProblem) -> Result<(f64, f64)> {
    let p = prob.binary_profile()?;
    if p.rho <= 0.0 {
        return Ok((0.0, 1.0));
    }
    let lo = p.rho / (p.rho + p.chi2_1);
    let hi = p.chi2_2 / (p.chi2_2 + p.rho);
    Ok((lo.max(0.0), hi.min(1.0)))
}

/// Grid oracle for the outer-bound minimum: scans phi over the feasible
/// interval (endpoints inclusive) and returns (min U, argmin phi).
pub fn outer_bound_grid_oracle(prob: &MaskingProblem, points: usize) -> Result<(f64, f64)> {
    let (lo, hi) = outer_phi_interval(prob)?;
    let mut best = f64::INFINITY;
    let mut best_phi = lo;
    for i in 0..=points {
        let phi = lo + (hi - lo) * i as f64 / points as f64;
        let (u, ok) = outer_bound_at_phi(prob, phi)?;
        if ok && u < best {
            best = u;
            best_phi = phi;
        }
    }
    Ok((best, best_phi))
}

/// Record of the inequalities the verdict evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct BoundConditions {
    pub kl_1: f64,
    pub kl_2: f64,
    pub chi2_1: f64,
    pub chi2_2: f64,
    pub rho: f64,
    pub psi: f64,
    pub kl_gap: f64,
    pub kl_symmetric: bool,
    pub rho_le_min_chi2: bool,
}

/// Inner/outer/optimal summary for a binary-input masking problem.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub inner_l: f64,
    pub inner_branch: InnerBranch,
    pub inner_degenerate: bool,
    pub outer_u: f64,
    pub outer_branch: OuterBranch,
    pub outer_degenerate: bool,
    /// Present only when the optimality preconditions hold and the two
    /// closed forms coincide.
    pub optimal: Option<f64>,
    pub conditions: BoundConditions,
}

pub fn optimality_verdict(prob: &MaskingProblem) -> Result<BoundReport> {
    optimality_verdict_with_tol(prob, KL_SYMMETRY_TOL)
}

pub fn optimality_verdict_with_tol(prob: &MaskingProblem, kl_tol: f64) -> Result<BoundReport> {
    let p = prob.binary_profile()?;
    let inner = inner_bound_infinite_key(prob)?;
    let outer = outer_bound_min(prob)?;
    let kl_gap = (p.kl_1 - p.kl_2).abs();
    let kl_symmetric = kl_gap <= kl_tol;
    let rho_le_min_chi2 = p.rho <= p.chi2_1.min(p.chi2_2);
    let optimal = if kl_symmetric && !inner.degenerate && !outer.degenerate {
        // Under the optimality preconditions the closed forms must coincide.
        if (inner.l - outer.u).abs() <= 1e-9 * (1.0 + outer.u.abs()) {
            Some(outer.u)
        } else {
            None
        }
    } else {
        None
    };
    Ok(BoundReport {
        inner_l: inner.l,
        inner_branch: inner.branch,
        inner_degenerate: inner.degenerate,
        outer_u: outer.u,
        outer_branch: outer.branch,
        outer_degenerate: outer.degenerate,
        optimal,
        conditions: BoundConditions {
            kl_1: p.kl_1,
            kl_2: p.kl_2,
            chi2_1: p.chi2_1,
            chi2_2: p.chi2_2,
            rho: p.rho,
            psi: p.psi,
            kl_gap,
            kl_symmetric,
            rho_le_min_chi2,
        },
    })
}

/// Samples the achievable region on the constraint ellipse boundary for a
/// fixed pair of input designs; helper for region sweeps and the CLI.
pub fn inner_region_sweep(
    prob: &MaskingProblem,
    pbar1: &Distribution,
    pbar2: &Distribution,
    angles: usize,
) -> Result<Vec<InnerBoundPoint>> {
    let q0 = prob.ch.q0();
    let qbar1 = output_distribution(prob.ch.w1(), pbar1)?;
    let qbar2 = output_distribution(prob.ch.w2(), pbar2)?;
    let radius2 = prob.quantile_radius().powi(2);
    let mut points = Vec::with_capacity(angles);
    for i in 1..angles {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / angles as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let quad = omega(c, s, q0, &qbar1, &qbar2)?;
        if quad <= 1e-18 {
            continue;
        }
        let t = (radius2 / quad).sqrt();
        points.push(inner_bound_point(prob, t * c, t * s, pbar1, pbar2)?);
    }
    Ok(points)
}

/// Divergence of the active row of state `s` against Q0; convenience for
/// reports.
pub fn active_kl(prob: &MaskingProblem, state: usize) -> Result<f64> {
    let (q1t, q2t) = prob.active_rows()?;
    let q = if state == 1 { q1t } else { q2t };
    kl_divergence(q, prob.ch.q0())
}
