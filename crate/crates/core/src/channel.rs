//! Discrete memoryless channels, the two-state compound channel with its
//! off-symbol structure, the output-hull feasibility check, and sparse
//! input distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probdist::{kl_divergence, Distribution, SUPPORT_EPS};

/// Tolerance for matching off-symbol rows.
pub const OFF_ROW_TOL: f64 = 1e-12;

/// A row-stochastic transition matrix W(y|x).
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    rows: Vec<Distribution>,
}

impl Dmc {
    pub fn new(rows: Vec<Distribution>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDistribution("channel has no rows".into()));
        }
        let out = rows[0].len();
        for r in &rows[1..] {
            if r.len() != out {
                return Err(Error::DimensionMismatch {
                    expected: out,
                    got: r.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_raw(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(Distribution::normalized)
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn input_len(&self) -> usize {
        self.rows.len()
    }

    pub fn output_len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &Distribution {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }
}

/// Output marginal p^T W.
pub fn output_distribution(w: &Dmc, p: &Distribution) -> Result<Distribution> {
    if p.len() != w.input_len() {
        return Err(Error::DimensionMismatch {
            expected: w.input_len(),
            got: p.len(),
        });
    }
    let mut out = vec![0.0; w.output_len()];
    for x in 0..w.input_len() {
        let px = p.get(x);
        if px > 0.0 {
            for y in 0..w.output_len() {
                out[y] += px * w.row(x).get(y);
            }
        }
    }
    Distribution::normalized(out)
}

/// Mutual information I(P, W) in nats.
pub fn mutual_information(p: &Distribution, w: &Dmc) -> Result<f64> {
    let q = output_distribution(w, p)?;
    let mut sum = 0.0;
    for x in 0..w.input_len() {
        let px = p.get(x);
        if px >= SUPPORT_EPS {
            sum += px * kl_divergence(w.row(x), &q)?;
        }
    }
    Ok(sum.max(0.0))
}

/// Conditional divergence D(W || q0 | pbar) = sum_x pbar(x) D(W(.|x) || q0).
pub fn conditional_kl(w: &Dmc, q0: &Distribution, pbar: &Distribution) -> Result<f64> {
    if pbar.len() != w.input_len() {
        return Err(Error::DimensionMismatch {
            expected: w.input_len(),
            got: pbar.len(),
        });
    }
    let mut sum = 0.0;
    for x in 0..w.input_len() {
        let px = pbar.get(x);
        if px >= SUPPORT_EPS {
            sum += px * kl_divergence(w.row(x), q0)?;
        }
    }
    Ok(sum)
}

/// The two-state compound channel. `off1`/`off2` index the inputs whose
/// rows coincide; that common row is Q0.
#[derive(Debug, Clone)]
pub struct CompoundChannel {
    w1: Dmc,
    w2: Dmc,
    off1: usize,
    off2: usize,
}

impl CompoundChannel {
    pub fn w1(&self) -> &Dmc {
        &self.w1
    }

    pub fn w2(&self) -> &Dmc {
        &self.w2
    }

    pub fn w(&self, state: usize) -> &Dmc {
        match state {
            1 => &self.w1,
            2 => &self.w2,
            _ => panic!("state must be 1 or 2"),
        }
    }

    pub fn off1(&self) -> usize {
        self.off1
    }

    pub fn off2(&self) -> usize {
        self.off2
    }

    pub fn off(&self, state: usize) -> usize {
        match state {
            1 => self.off1,
            2 => self.off2,
            _ => panic!("state must be 1 or 2"),
        }
    }

    pub fn input_len(&self) -> usize {
        self.w1.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.w1.output_len()
    }

    /// The shared off-symbol output row Q0.
    pub fn q0(&self) -> &Distribution {
        self.w1.row(self.off1)
    }
}

fn rows_match(a: &Distribution, b: &Distribution, tol: f64) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|y| (a.get(y) - b.get(y)).abs() <= tol)
}

/// Finds the lexicographically smallest input pair (x, x') whose rows match
/// within `tol` and builds the compound channel around it.
pub fn validate_compound_with_tol(w1: Dmc, w2: Dmc, tol: f64) -> Result<CompoundChannel> {
    if w1.output_len() != w2.output_len() {
        return Err(Error::DimensionMismatch {
            expected: w1.output_len(),
            got: w2.output_len(),
        });
    }
    if w1.input_len() != w2.input_len() {
        return Err(Error::DimensionMismatch {
            expected: w1.input_len(),
            got: w2.input_len(),
        });
    }
    for x1 in 0..w1.input_len() {
        for x2 in 0..w2.input_len() {
            if rows_match(w1.row(x1), w2.row(x2), tol) {
                return Ok(CompoundChannel {
                    w1,
                    w2,
                    off1: x1,
                    off2: x2,
                });
            }
        }
    }
    Err(Error::NoOffSymbol)
}

pub fn validate_compound(w1: Dmc, w2: Dmc) -> Result<CompoundChannel> {
    validate_compound_with_tol(w1, w2, OFF_ROW_TOL)
}

/// Builds the channel with caller-specified off symbols, verifying they match.
pub fn compound_with_off(w1: Dmc, w2: Dmc, off1: usize, off2: usize, tol: f64) -> Result<CompoundChannel> {
    if off1 >= w1.input_len() || off2 >= w2.input_len() {
        return Err(Error::DomainError(format!(
            "off symbols ({off1}, {off2}) out of range for {} inputs",
            w1.input_len()
        )));
    }
    if !rows_match(w1.row(off1), w2.row(off2), tol) {
        return Err(Error::NoOffSymbol);
    }
    Ok(CompoundChannel { w1, w2, off1, off2 })
}

/// True iff every row of both channels is absolutely continuous w.r.t. Q0.
pub fn absolute_continuity_check(ch: &CompoundChannel) -> bool {
    let q0 = ch.q0();
    for w in [ch.w1(), ch.w2()] {
        for row in w.rows() {
            for y in 0..q0.len() {
                if !row.is_zero_at(y) && q0.is_zero_at(y) {
                    return false;
                }
            }
        }
    }
    true
}

/// Sparse input: mass 1 - mu on the off symbol, mu * pbar elsewhere.
#[derive(Debug, Clone)]
pub struct SparseInput {
    mu: f64,
    pbar: Distribution,
    off: usize,
}

impl SparseInput {
    pub fn new(mu: f64, pbar: Distribution, off: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::MuOutOfRange(mu));
        }
        if off >= pbar.len() {
            return Err(Error::DomainError(format!(
                "off symbol {off} out of range for {} inputs",
                pbar.len()
            )));
        }
        if !pbar.is_zero_at(off) {
            return Err(Error::OffSymbolMassNonzero {
                index: off,
                mass: pbar.get(off),
            });
        }
        Ok(Self { mu, pbar, off })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn pbar(&self) -> &Distribution {
        &self.pbar
    }

    pub fn off(&self) -> usize {
        self.off
    }

    /// The full input distribution P_{s,n}.
    pub fn input_distribution(&self) -> Distribution {
        let mut probs: Vec<f64> = self
            .pbar
            .probs()
            .iter()
            .map(|&p| self.mu * p)
            .collect();
        probs[self.off] = 1.0 - self.mu;
        Distribution::normalized(probs).expect("sparse mixture is a valid distribution")
    }
}

/// Result of the output-hull intersection search.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FeasibilityReport {
    /// L1 distance between the closest achievable output pair.
    pub gap: f64,
    pub p1: Distribution,
    pub p2: Distribution,
    /// Proposition-1 necessary condition: hulls intersect (gap below 1e-8).
    pub feasible: bool,
    pub iterations: usize,
}

const FW_MAX_ITERS: usize = 100_000;
const FW_GAP_STOP: f64 = 1e-12;
const FEASIBLE_GAP: f64 = 1e-8;

/// Minimizes || p1^T W1 - p2^T W2 ||_1 over the product of simplices via
/// Frank-Wolfe on the smooth surrogate (1/2)|| . ||_2^2 with exact line
/// search, then reports the L1 gap at the final iterate.
pub fn feasibility_gap(w1: &Dmc, w2: &Dmc) -> Result<FeasibilityReport> {
    if w1.output_len() != w2.output_len() {
        return Err(Error::DimensionMismatch {
            expected: w1.output_len(),
            got: w2.output_len(),
        });
    }
    let ny = w1.output_len();
    let (n1, n2) = (w1.input_len(), w2.input_len());
    let mut p1 = vec![1.0 / n1 as f64; n1];
    let mut p2 = vec![1.0 / n2 as f64; n2];

    let residual = |p1: &[f64], p2: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; ny];
        for x in 0..n1 {
            for y in 0..ny {
                r[y] += p1[x] * w1.row(x).get(y);
            }
        }
        for x in 0..n2 {
            for y in 0..ny {
                r[y] -= p2[x] * w2.row(x).get(y);
            }
        }
        r
    };

    let mut iterations = 0;
    for it in 0..FW_MAX_ITERS {
        iterations = it + 1;
        let r = residual(&p1, &p2);
        // Gradients: d f / d p1_x = <W1 row x, r>, d f / d p2_x = -<W2 row x, r>.
        let g1: Vec<f64> = (0..n1)
            .map(|x| (0..ny).map(|y| w1.row(x).get(y) * r[y]).sum())
            .collect();
        let g2: Vec<f64> = (0..n2)
            .map(|x| -(0..ny).map(|y| w2.row(x).get(y) * r[y]).sum::<f64>())
            .collect();
        // Linear minimization oracle: a vertex of each simplex.
        let v1 = (0..n1)
            .min_by(|&a, &b| g1[a].partial_cmp(&g1[b]).unwrap())
            .unwrap();
        let v2 = (0..n2)
            .min_by(|&a, &b| g2[a].partial_cmp(&g2[b]).unwrap())
            .unwrap();
        // Duality gap <x - v, grad>.
        let mut fw_gap = 0.0;
        for x in 0..n1 {
            fw_gap += (p1[x] - if x == v1 { 1.0 } else { 0.0 }) * g1[x];
        }
        for x in 0..n2 {
            fw_gap += (p2[x] - if x == v2 { 1.0 } else { 0.0 }) * g2[x];
        }
        if fw_gap <= FW_GAP_STOP {
            break;
        }
        // Exact line search: f is quadratic along the segment. The residual
        // change is W1^T(e_{v1} - p1) - W2^T(e_{v2} - p2) = rowdiff - r.
        let mut dr = vec![0.0; ny];
        for y in 0..ny {
            dr[y] = w1.row(v1).get(y) - w2.row(v2).get(y) - r[y];
        }
        let num: f64 = (0..ny).map(|y| r[y] * dr[y]).sum();
        let den: f64 = (0..ny).map(|y| dr[y] * dr[y]).sum();
        let t = if den <= 0.0 {
            1.0
        } else {
            (-num / den).clamp(0.0, 1.0)
        };
        if t <= 0.0 {
            break;
        }
        for x in 0..n1 {
            p1[x] *= 1.0 - t;
        }
        p1[v1] += t;
        for x in 0..n2 {
            p2[x] *= 1.0 - t;
        }
        p2[v2] += t;
    }

    let r = residual(&p1, &p2);
    let gap: f64 = r.iter().map(|v| v.abs()).sum();
    Ok(FeasibilityReport {
        gap,
        feasible: gap <= FEASIBLE_GAP,
        p1: Distribution::normalized(p1)?,
        p2: Distribution::normalized(p2)?,
        iterations,
    })
}

/// JSON schema for channel files: {"w1": [[..]..], "w2": [[..]..]} with
/// optional off-symbol overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off2: Option<usize>,
}

impl ChannelSpec {
    pub fn to_compound(&self) -> Result<CompoundChannel> {
        self.to_compound_with_tol(OFF_ROW_TOL)
    }

    pub fn to_compound_with_tol(&self, tol: f64) -> Result<CompoundChannel> {
        let w1 = Dmc::from_raw(self.w1.clone())?;
        let w2 = Dmc::from_raw(self.w2.clone())?;
        match (self.off1, self.off2) {
            (Some(o1), Some(o2)) => compound_with_off(w1, w2, o1, o2, tol),
            _ => validate_compound_with_tol(w1, w2, tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probdist::kl_divergence;

    fn bsc(p: f64) -> Dmc {
        Dmc::from_raw(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
    }

    /// The three-output channel pair whose off rows coincide but whose
    /// active rows escape the Q0 support.
    pub(crate) fn fig5_channel() -> CompoundChannel {
        let w1 = Dmc::from_raw(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]]).unwrap();
        let w2 = Dmc::from_raw(vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5]]).unwrap();
        validate_compound(w1, w2).unwrap()
    }

    #[test]
    fn validate_identical_channels() {
        let ch = validate_compound(bsc(0.1), bsc(0.1)).unwrap();
        assert_eq!((ch.off1(), ch.off2()), (0, 0));
    }

    #[test]
    fn validate_fig5() {
        let ch = fig5_channel();
        assert_eq!((ch.off1(), ch.off2()), (0, 0));
        assert_eq!(ch.q0().probs(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn validate_no_off_symbol() {
        let w1 = Dmc::from_raw(vec![vec![0.9, 0.1], vec![0.8, 0.2]]).unwrap();
        let w2 = Dmc::from_raw(vec![vec![0.4, 0.6], vec![0.1, 0.9]]).unwrap();
        assert!(matches!(validate_compound(w1, w2), Err(Error::NoOffSymbol)));
    }

    #[test]
    fn output_distribution_examples() {
        let w = Dmc::from_raw(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]]).unwrap();
        let pm = Distribution::point_mass(1, 2);
        assert_eq!(output_distribution(&w, &pm).unwrap(), *w.row(1));
        let sparse = SparseInput::new(0.0, Distribution::point_mass(1, 2), 0).unwrap();
        assert_eq!(
            output_distribution(&w, &sparse.input_distribution()).unwrap(),
            *w.row(0)
        );
        let sparse = SparseInput::new(0.2, Distribution::point_mass(1, 2), 0).unwrap();
        let out = output_distribution(&w, &sparse.input_distribution()).unwrap();
        for (got, want) in out.probs().iter().zip([0.4, 0.5, 0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_input_rejects_off_mass() {
        let pbar = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            SparseInput::new(0.1, pbar, 0),
            Err(Error::OffSymbolMassNonzero { .. })
        ));
        assert!(matches!(
            SparseInput::new(1.0, Distribution::point_mass(1, 2), 0),
            Err(Error::MuOutOfRange(_))
        ));
    }

    #[test]
    fn ac_check() {
        let ch = validate_compound(bsc(0.1), bsc(0.1)).unwrap();
        assert!(absolute_continuity_check(&ch));
        assert!(!absolute_continuity_check(&fig5_channel()));
    }

    #[test]
    fn mutual_information_examples() {
        let w = bsc(0.1);
        assert_eq!(mutual_information(&Distribution::point_mass(0, 2), &w).unwrap(), 0.0);
        let same = Dmc::from_raw(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let half = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!(mutual_information(&half, &same).unwrap().abs() < 1e-12);
        let noiseless = Dmc::from_raw(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((mutual_information(&half, &noiseless).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn conditional_kl_via_mixture() {
        // pbar = (0.5, 0.5) over rows Bern(0.5)/Bern(0.25), q0 = Bern(0.25):
        // conditional KL is half the Bern(0.5)||Bern(0.25) divergence.
        let rows = Dmc::from_raw(vec![vec![0.5, 0.5], vec![0.75, 0.25]]).unwrap();
        let q0 = Distribution::new(vec![0.75, 0.25]).unwrap();
        let pbar = Distribution::new(vec![0.5, 0.5]).unwrap();
        let sum = conditional_kl(&rows, &q0, &pbar).unwrap();
        assert!((sum - 0.071920).abs() < 1e-6);
        // Degenerate mixtures.
        let pm0 = Distribution::point_mass(1, 2);
        let direct = kl_divergence(rows.row(1), &q0).unwrap();
        assert!((conditional_kl(&rows, &q0, &pm0).unwrap() - direct).abs() < 1e-15);
        assert_eq!(conditional_kl(&rows, rows.row(0), &Distribution::point_mass(0, 2)).unwrap(), 0.0);
    }

    #[test]
    fn feasibility_identical_channels() {
        let w = bsc(0.1);
        let rep = feasibility_gap(&w, &w).unwrap();
        assert!(rep.gap < 1e-10);
        assert!(rep.feasible);
    }

    #[test]
    fn feasibility_shared_off_rows() {
        let ch = fig5_channel();
        let rep = feasibility_gap(ch.w1(), ch.w2()).unwrap();
        assert!(rep.gap < 1e-8, "gap = {}", rep.gap);
        assert!(rep.feasible);
    }

    #[test]
    fn feasibility_disjoint_intervals() {
        let w1 = Dmc::from_raw(vec![vec![0.9, 0.1], vec![0.8, 0.2]]).unwrap();
        let w2 = Dmc::from_raw(vec![vec![0.4, 0.6], vec![0.1, 0.9]]).unwrap();
        let rep = feasibility_gap(&w1, &w2).unwrap();
        assert!((rep.gap - 0.8).abs() < 1e-6, "gap = {}", rep.gap);
        assert!(!rep.feasible);
    }

    #[test]
    fn channel_spec_roundtrip() {
        let spec = ChannelSpec {
            w1: vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]],
            w2: vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5]],
            off1: None,
            off2: None,
        };
        let ch = spec.to_compound().unwrap();
        assert_eq!((ch.off1(), ch.off2()), (0, 0));
        let s = serde_json::to_string(&spec).unwrap();
        let back: ChannelSpec = serde_json::from_str(&s).unwrap();
        assert!(back.to_compound().is_ok());
    }
}
