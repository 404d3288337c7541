//! Finite-blocklength validation: i.i.d. sparse codebooks, ML decoding,
//! exact or Monte Carlo induced-output total variation, and the
//! adversary's threshold test.
//!
//! All randomness is counter-based: every draw is a pure function of
//! (seed, domain, indices), so codebooks and trials are reproducible and
//! order-independent.

use serde::{Deserialize, Serialize};

use crate::channel::{CompoundChannel, Dmc, SparseInput};
use crate::error::{Error, Result};
use crate::probdist::{adversary_moments, test_statistic, Distribution};

/// Default exact-enumeration budget, in weighted operations
/// (codewords times output sequences).
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Cap on |M||K| for the Monte Carlo density-based TV estimator.
pub const MC_TV_CODEWORD_CAP: usize = 4096;

const DOMAIN_CODEBOOK: u64 = 1;
const DOMAIN_TRIAL: u64 = 2;
const DOMAIN_PICK: u64 = 3;
const DOMAIN_ADVERSARY: u64 = 4;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn counter_u64(seed: u64, tags: &[u64]) -> u64 {
    let mut acc = mix64(seed ^ 0x6a09e667f3bcc908);
    for &t in tags {
        acc = mix64(acc ^ t.wrapping_mul(0x9e3779b97f4a7c15));
    }
    acc
}

/// Uniform draw in [0, 1) from the counter stream.
fn counter_uniform(seed: u64, tags: &[u64]) -> f64 {
    (counter_u64(seed, tags) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// CDF-inversion sample from a finite distribution.
fn sample_index(d: &Distribution, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in d.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    d.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Exact,
    MonteCarlo,
}

/// Full experiment configuration; identical configs give bit-identical
/// reports.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub ch: CompoundChannel,
    pub gamma1: f64,
    pub gamma2: f64,
    pub pbar1: Distribution,
    pub pbar2: Distribution,
    pub n: usize,
    pub m_count: usize,
    pub k_count: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: SimMode,
    /// Adversary mixing parameter; 1/2 is the symmetric-case optimum.
    pub phi: f64,
    /// Exact-enumeration budget in weighted operations.
    pub budget: u128,
    /// Reject Monte Carlo runs whose 95% CI half-width exceeds this.
    pub max_ci: Option<f64>,
}

impl SimConfig {
    fn gamma(&self, state: usize) -> f64 {
        if state == 1 {
            self.gamma1
        } else {
            self.gamma2
        }
    }

    fn pbar(&self, state: usize) -> &Distribution {
        if state == 1 {
            &self.pbar1
        } else {
            &self.pbar2
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma1 > 0.0) || !(self.gamma2 > 0.0) {
            return Err(Error::NonPositiveGamma {
                gamma1: self.gamma1,
                gamma2: self.gamma2,
            });
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::PhiOutOfRange(self.phi));
        }
        if self.n == 0 || self.m_count == 0 || self.k_count == 0 {
            return Err(Error::DomainError(
                "n, m_count, and k_count must be positive".into(),
            ));
        }
        if self.mode == SimMode::MonteCarlo && self.trials == 0 {
            return Err(Error::DomainError("trials must be positive".into()));
        }
        Ok(())
    }
}

/// Random codebook of one state: (message, key) indexed input sequences.
#[derive(Debug, Clone, Serialize)]
pub struct Codebook {
    pub state: usize,
    pub n: usize,
    pub m_count: usize,
    pub k_count: usize,
    /// Row m * k_count + k holds the word for (message m, key k).
    words: Vec<Vec<usize>>,
    /// Weight fraction range of the realized words (off symbol excluded).
    pub mu_low: f64,
    pub mu_high: f64,
    off: usize,
}

impl Codebook {
    pub fn word(&self, m: usize, k: usize) -> &[usize] {
        &self.words[m * self.k_count + k]
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    pub fn off(&self) -> usize {
        self.off
    }

    fn weight_fraction(&self, word: &[usize]) -> f64 {
        word.iter().filter(|&&x| x != self.off).count() as f64 / self.n as f64
    }
}

/// Draws the state-s codebook i.i.d. from the sparse input P_{s,n} with
/// mu = gamma_s / sqrt(n).
pub fn generate_codebook(cfg: &SimConfig, state: usize) -> Result<Codebook> {
    cfg.validate()?;
    let mu = cfg.gamma(state) / (cfg.n as f64).sqrt();
    let off = cfg.ch.off(state);
    // SparseInput re-validates mu's range and the off-symbol mass.
    let sparse = SparseInput::new(mu, cfg.pbar(state).clone(), off)?;
    let pbar = sparse.pbar();
    let mut words = Vec::with_capacity(cfg.m_count * cfg.k_count);
    for m in 0..cfg.m_count {
        for k in 0..cfg.k_count {
            let mut word = Vec::with_capacity(cfg.n);
            for i in 0..cfg.n {
                let tags = [DOMAIN_CODEBOOK, state as u64, m as u64, k as u64, i as u64];
                let u_active = counter_uniform(cfg.seed, &tags);
                if u_active < mu {
                    let tags2 =
                        [DOMAIN_PICK, state as u64, m as u64, k as u64, i as u64];
                    word.push(sample_index(pbar, counter_uniform(cfg.seed, &tags2)));
                } else {
                    word.push(off);
                }
            }
            words.push(word);
        }
    }
    let mut cb = Codebook {
        state,
        n: cfg.n,
        m_count: cfg.m_count,
        k_count: cfg.k_count,
        words,
        mu_low: 0.0,
        mu_high: 0.0,
        off,
    };
    let fracs: Vec<f64> = cb.words.iter().map(|w| cb.weight_fraction(w)).collect();
    cb.mu_low = fracs.iter().cloned().fold(f64::INFINITY, f64::min);
    cb.mu_high = fracs.iter().cloned().fold(0.0, f64::max);
    Ok(cb)
}

fn enumeration_cost(words: usize, y_len: usize, n: usize) -> u128 {
    let mut c: u128 = words as u128;
    for _ in 0..n {
        c = c.saturating_mul(y_len as u128);
    }
    c
}

fn check_budget(cost: u128, budget: u128) -> Result<()> {
    if cost > budget {
        return Err(Error::BudgetExceeded { cost, budget });
    }
    Ok(())
}

/// Explicit induced output distribution over Y^n, indexed base-|Y| with
/// the first channel use as the most significant digit.
pub fn induced_output_distribution(cb: &Codebook, w: &Dmc, budget: u128) -> Result<Vec<f64>> {
    let y_len = w.output_len();
    let total = enumeration_cost(cb.words.len(), y_len, cb.n);
    check_budget(total, budget)?;
    let size = y_len.checked_pow(cb.n as u32).ok_or(Error::BudgetExceeded {
        cost: total,
        budget,
    })?;
    let mut out = vec![0.0f64; size];
    let weight = 1.0 / cb.words.len() as f64;
    for word in &cb.words {
        // Iterative tensor expansion of the product law of this word.
        let mut cur = vec![1.0f64];
        for &x in word {
            let row = w.row(x);
            let mut next = vec![0.0f64; cur.len() * y_len];
            for (j, &v) in cur.iter().enumerate() {
                for y in 0..y_len {
                    next[j * y_len + y] = v * row.get(y);
                }
            }
            cur = next;
        }
        for (o, v) in out.iter_mut().zip(cur.iter()) {
            *o += weight * v;
        }
    }
    Ok(out)
}

/// Exact total variation between the two induced output laws by full
/// enumeration over Y^n.
pub fn exact_tv_induced(cb1: &Codebook, cb2: &Codebook, ch: &CompoundChannel, budget: u128) -> Result<f64> {
    let q1 = induced_output_distribution(cb1, ch.w1(), budget)?;
    let q2 = induced_output_distribution(cb2, ch.w2(), budget)?;
    Ok(0.5 * q1.iter().zip(q2.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Maximum-likelihood message decoding under key `key`; log-domain
/// accumulation, ties broken toward the smallest message index.
pub fn ml_decode(yn: &[usize], cb: &Codebook, key: usize, w: &Dmc) -> usize {
    let mut best_m = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for m in 0..cb.m_count {
        let word = cb.word(m, key);
        let mut ll = 0.0f64;
        for (&x, &y) in word.iter().zip(yn.iter()) {
            let p = w.row(x).get(y);
            if p <= 0.0 {
                ll = f64::NEG_INFINITY;
                break;
            }
            ll += p.ln();
        }
        if ll > best_ll {
            best_ll = ll;
            best_m = m;
        }
    }
    best_m
}

/// Experiment outcome; every probability lies in [0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub pe_max: f64,
    pub pe_avg: f64,
    pub tv_induced: f64,
    /// 95% CI half-width; 0 in exact mode, NaN when the estimator was
    /// unavailable.
    pub tv_ci: f64,
    pub alpha: f64,
    pub alpha_ci: f64,
    pub beta: f64,
    pub beta_ci: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    pub tv_exact_flag: bool,
    /// Hypothesis-test lower bound max(0, 1 - alpha - beta).
    pub tv_lower: f64,
    /// Whether tv_lower <= tv_induced + CI slack held.
    pub invariant_ok: bool,
    pub tau: f64,
    pub phi: f64,
}

struct AdversaryTest {
    tstat: Vec<f64>,
    tau: f64,
}

fn build_adversary_test(cfg: &SimConfig, mu_low: f64) -> Result<AdversaryTest> {
    let q1t = crate::channel::output_distribution(cfg.ch.w1(), &cfg.pbar1)?;
    let q2t = crate::channel::output_distribution(cfg.ch.w2(), &cfg.pbar2)?;
    let q0 = cfg.ch.q0();
    let m = adversary_moments(cfg.phi, &q1t, &q2t, q0)?;
    let tstat = test_statistic(cfg.phi, &q1t, &q2t, q0)?;
    let tau = (cfg.n as f64 * mu_low / 2.0) * (m.d1 + m.d2);
    Ok(AdversaryTest { tstat, tau })
}

/// Exact sweep over Y^n accumulating TV, the threshold-test errors, and,
/// per (state, m, k), the exact ML error probability.
fn exact_analysis(
    cfg: &SimConfig,
    cb1: &Codebook,
    cb2: &Codebook,
    test: &AdversaryTest,
) -> Result<(f64, f64, f64, f64, f64)> {
    let y_len = cfg.ch.output_len();
    let mk = cfg.m_count * cfg.k_count;
    let cost = enumeration_cost(2 * mk, y_len, cfg.n);
    check_budget(cost, cfg.budget)?;
    let size = y_len.pow(cfg.n as u32);
    let mut tv_acc = 0.0;
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut pe = vec![0.0f64; 2 * mk];
    let mut yn = vec![0usize; cfg.n];
    let mut lik = vec![0.0f64; cfg.m_count];
    for idx in 0..size {
        // Decode idx into digits, most significant first.
        let mut rem = idx;
        for i in (0..cfg.n).rev() {
            yn[i] = rem % y_len;
            rem /= y_len;
        }
        let mut q1 = 0.0;
        let mut q2 = 0.0;
        for (s, cb) in [(0usize, cb1), (1usize, cb2)] {
            let w = cfg.ch.w(s + 1);
            for k in 0..cfg.k_count {
                let mut best_m = 0;
                let mut best = f64::NEG_INFINITY;
                for m in 0..cfg.m_count {
                    let mut p = 1.0f64;
                    for (&x, &y) in cb.word(m, k).iter().zip(yn.iter()) {
                        p *= w.row(x).get(y);
                    }
                    lik[m] = p;
                    if p > best {
                        best = p;
                        best_m = m;
                    }
                }
                for m in 0..cfg.m_count {
                    if s == 0 {
                        q1 += lik[m];
                    } else {
                        q2 += lik[m];
                    }
                    if m != best_m {
                        pe[s * mk + m * cfg.k_count + k] += lik[m];
                    }
                }
            }
        }
        q1 /= mk as f64;
        q2 /= mk as f64;
        tv_acc += (q1 - q2).abs();
        let sum_t: f64 = yn.iter().map(|&y| test.tstat[y]).sum();
        if sum_t <= test.tau {
            alpha += q1;
        } else {
            beta += q2;
        }
    }
    let pe_max = pe.iter().cloned().fold(0.0f64, f64::max).min(1.0);
    let pe_avg = pe.iter().sum::<f64>() / pe.len() as f64;
    Ok((0.5 * tv_acc, alpha.min(1.0), beta.min(1.0), pe_max, pe_avg))
}

fn generate_output(
    cfg: &SimConfig,
    word: &[usize],
    w: &Dmc,
    tags_head: &[u64],
    yn: &mut Vec<usize>,
) {
    yn.clear();
    for (i, &x) in word.iter().enumerate() {
        let mut tags = Vec::with_capacity(tags_head.len() + 1);
        tags.extend_from_slice(tags_head);
        tags.push(i as u64);
        yn.push(sample_index(w.row(x), counter_uniform(cfg.seed, &tags)));
    }
}

fn log_mixture_density(cb: &Codebook, w: &Dmc, yn: &[usize]) -> f64 {
    // log((1/|C|) sum_c prod_i W(y_i | c_i)) via log-sum-exp.
    let mut lls = Vec::with_capacity(cb.words.len());
    let mut max_ll = f64::NEG_INFINITY;
    for word in &cb.words {
        let mut ll = 0.0f64;
        for (&x, &y) in word.iter().zip(yn.iter()) {
            let p = w.row(x).get(y);
            if p <= 0.0 {
                ll = f64::NEG_INFINITY;
                break;
            }
            ll += p.ln();
        }
        max_ll = max_ll.max(ll);
        lls.push(ll);
    }
    if max_ll == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = lls.iter().map(|&ll| (ll - max_ll).exp()).sum();
    max_ll + (sum / cb.words.len() as f64).ln()
}

fn mc_ci(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Monte Carlo ML error rates per (state, m, k).
fn mc_error_rates(cfg: &SimConfig, cb1: &Codebook, cb2: &Codebook) -> (f64, f64) {
    let mut pe_max = 0.0f64;
    let mut pe_sum = 0.0f64;
    let mut yn = Vec::with_capacity(cfg.n);
    for (s, cb) in [(1usize, cb1), (2usize, cb2)] {
        let w = cfg.ch.w(s);
        for m in 0..cfg.m_count {
            for k in 0..cfg.k_count {
                let word = cb.word(m, k);
                let mut errors = 0usize;
                for t in 0..cfg.trials {
                    let head = [DOMAIN_TRIAL, s as u64, m as u64, k as u64, t as u64];
                    generate_output(cfg, word, w, &head, &mut yn);
                    if ml_decode(&yn, cb, k, w) != m {
                        errors += 1;
                    }
                }
                let rate = errors as f64 / cfg.trials as f64;
                pe_max = pe_max.max(rate);
                pe_sum += rate;
            }
        }
    }
    (pe_max, pe_sum / (2 * cfg.m_count * cfg.k_count) as f64)
}

/// Monte Carlo adversary errors: sample from each induced mixture, apply
/// the threshold test.
fn mc_adversary(
    cfg: &SimConfig,
    cb1: &Codebook,
    cb2: &Codebook,
    test: &AdversaryTest,
) -> (f64, f64, f64, f64) {
    let mk = cfg.m_count * cfg.k_count;
    let mut rates = [0.0f64; 2];
    let mut yn = Vec::with_capacity(cfg.n);
    for (s, cb) in [(1usize, cb1), (2usize, cb2)] {
        let w = cfg.ch.w(s);
        let mut hits = 0usize;
        for t in 0..cfg.trials {
            let pick = [DOMAIN_ADVERSARY, s as u64, t as u64, 0];
            let j = (counter_u64(cfg.seed, &pick) % mk as u64) as usize;
            let head = [DOMAIN_ADVERSARY, s as u64, t as u64, 1 + j as u64];
            generate_output(cfg, &cb.words[j], w, &head, &mut yn);
            let sum_t: f64 = yn.iter().map(|&y| test.tstat[y]).sum();
            let fired = if s == 1 { sum_t <= test.tau } else { sum_t > test.tau };
            if fired {
                hits += 1;
            }
        }
        rates[s - 1] = hits as f64 / cfg.trials as f64;
    }
    (
        rates[0],
        mc_ci(rates[0], cfg.trials),
        rates[1],
        mc_ci(rates[1], cfg.trials),
    )
}

/// Monte Carlo TV via the density-ratio estimator E_{Q1}[(1 - Q2/Q1)^+];
/// requires |M||K| <= MC_TV_CODEWORD_CAP for exact per-point densities.
fn mc_tv(cfg: &SimConfig, cb1: &Codebook, cb2: &Codebook) -> Option<(f64, f64)> {
    let mk = cfg.m_count * cfg.k_count;
    if mk > MC_TV_CODEWORD_CAP {
        return None;
    }
    let w1 = cfg.ch.w1();
    let w2 = cfg.ch.w2();
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut yn = Vec::with_capacity(cfg.n);
    for t in 0..cfg.trials {
        let pick = [DOMAIN_ADVERSARY, 3, t as u64, 0];
        let j = (counter_u64(cfg.seed, &pick) % mk as u64) as usize;
        let head = [DOMAIN_ADVERSARY, 3, t as u64, 1 + j as u64];
        generate_output(cfg, &cb1.words[j], w1, &head, &mut yn);
        let l1 = log_mixture_density(cb1, w1, &yn);
        let l2 = log_mixture_density(cb2, w2, &yn);
        let v = if l2 == f64::NEG_INFINITY {
            1.0
        } else {
            (1.0 - (l2 - l1).exp()).max(0.0)
        };
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / cfg.trials as f64;
    let var = (sum_sq / cfg.trials as f64 - mean * mean).max(0.0);
    Some((mean, 1.96 * (var / cfg.trials as f64).sqrt()))
}

/// Runs the full experiment: codebook generation, error statistics, the
/// induced TV, and the adversary's threshold test.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let cb1 = generate_codebook(cfg, 1)?;
    let cb2 = generate_codebook(cfg, 2)?;
    let mu_low = cb1.mu_low.min(cb2.mu_low);
    let mu_high = cb1.mu_high.max(cb2.mu_high);
    let test = build_adversary_test(cfg, mu_low)?;
    let report = match cfg.mode {
        SimMode::Exact => {
            let (tv, alpha, beta, pe_max, pe_avg) = exact_analysis(cfg, &cb1, &cb2, &test)?;
            let tv_lower = (1.0 - alpha - beta).max(0.0);
            SimReport {
                pe_max,
                pe_avg,
                tv_induced: tv,
                tv_ci: 0.0,
                alpha,
                alpha_ci: 0.0,
                beta,
                beta_ci: 0.0,
                mu_low,
                mu_high,
                tv_exact_flag: true,
                tv_lower,
                invariant_ok: tv_lower <= tv,
                tau: test.tau,
                phi: cfg.phi,
            }
        }
        SimMode::MonteCarlo => {
            let (pe_max, pe_avg) = mc_error_rates(cfg, &cb1, &cb2);
            let (alpha, alpha_ci, beta, beta_ci) = mc_adversary(cfg, &cb1, &cb2, &test);
            let (tv, tv_ci) = match mc_tv(cfg, &cb1, &cb2) {
                Some(pair) => pair,
                None => (f64::NAN, f64::NAN),
            };
            if let Some(cap) = cfg.max_ci {
                for ci in [alpha_ci, beta_ci, tv_ci] {
                    if ci.is_finite() && ci > cap {
                        return Err(Error::InsufficientTrials {
                            got: ci,
                            requested: cap,
                        });
                    }
                }
            }
            let tv_lower = (1.0 - alpha - beta).max(0.0);
            let invariant_ok = if tv.is_nan() {
                true
            } else {
                tv_lower <= tv + 2.0 * (tv_ci + alpha_ci + beta_ci)
            };
            SimReport {
                pe_max,
                pe_avg,
                tv_induced: tv,
                tv_ci,
                alpha,
                alpha_ci,
                beta,
                beta_ci,
                mu_low,
                mu_high,
                tv_exact_flag: false,
                tv_lower,
                invariant_ok,
                tau: test.tau,
                phi: cfg.phi,
            }
        }
    };
    Ok(report)
}

/// One blocklength of the square-root-law sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m_count: usize,
    pub log_m: f64,
    /// log|M| / sqrt(n), nats per sqrt(n).
    pub ratio: f64,
    pub pe_max: f64,
    pub tv_induced: f64,
    /// max(0, tv_induced - delta), the finite-n overshoot.
    pub slack: f64,
}

/// Largest-|M| search per blocklength: doubling then bisection on the
/// simulated maximum error rate.
pub fn sqrt_law_sweep(
    template: &SimConfig,
    delta: f64,
    n_list: &[usize],
    target_pe: f64,
) -> Result<Vec<SweepRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSweepSpec(
            "n_list must be strictly ascending".into(),
        ));
    }
    if !(target_pe > 0.0 && target_pe < 1.0) {
        return Err(Error::DomainError(format!(
            "target_pe must lie in (0,1), got {target_pe}"
        )));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut cfg = template.clone();
        cfg.n = n;
        let pe_at = |m: usize| -> Result<f64> {
            let mut c = cfg.clone();
            c.m_count = m;
            let cb1 = generate_codebook(&c, 1)?;
            let cb2 = generate_codebook(&c, 2)?;
            Ok(mc_error_rates(&c, &cb1, &cb2).0)
        };
        let mut best = 1usize;
        if pe_at(1)? <= target_pe {
            // Doubling phase.
            let mut hi = 2usize;
            while hi <= MC_TV_CODEWORD_CAP && pe_at(hi)? <= target_pe {
                best = hi;
                hi *= 2;
            }
            // Bisection between the last pass and the first failure.
            let (mut lo, mut hi) = (best, hi.min(MC_TV_CODEWORD_CAP + 1));
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if pe_at(mid)? <= target_pe {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = lo;
        }
        cfg.m_count = best;
        let report = run_experiment(&cfg)?;
        let log_m = (best as f64).ln();
        rows.push(SweepRow {
            n,
            m_count: best,
            log_m,
            ratio: log_m / (n as f64).sqrt(),
            pe_max: report.pe_max,
            tv_induced: report.tv_induced,
            slack: (report.tv_induced - delta).max(0.0),
        });
    }
    Ok(rows)
}
