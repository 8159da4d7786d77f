//! Reproducible Monte Carlo over k-card-minimum permutations, and the
//! statistical verdicts built on it.
//!
//! Replicate `r` of sweep point `i` draws from its own generator seeded by
//! [`replicate_seed`], so results never depend on worker count or
//! scheduling. Per-replicate values are collected in replicate order and
//! reduced sequentially.
//!
//! All finite-`n` thresholds below are calibration choices: the limit laws
//! being checked carry no convergence rates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::model::relative_to_permutation;
use crate::numeric::mean_var;
use crate::rng::{stream_rng, KcmRng};
use crate::sampler::{DrawTrace, KcmSampler, SamplerMode};
use crate::stat_tests::{chi_square_critical, ks_distance_normal};
use crate::stats::{
    asymptotic_constants, count_inversions, exact_step_moments, exact_total_moments, greedy_lower_bound,
    inversion_profile, lis_length, perturb_relative, Moments,
};
use crate::strategies::{replay, sample_with_strategy, ChoiceStrategy, MinStrategy, StrategyRegistry};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_KS_THRESHOLD: f64 = 0.03;

/// How `k` is chosen for each deck size in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum KRule {
    Fixed { k: u32 },
    /// `k_n = ceil(n^beta)`, `0 < beta < 1`.
    Power { beta: f64 },
    /// Explicit `n -> k` pairs.
    Table { ks: BTreeMap<usize, u32> },
}

impl KRule {
    pub fn resolve(&self, n: usize) -> Result<u32> {
        let k = match self {
            KRule::Fixed { k } => *k,
            KRule::Power { beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(KcmError::Config(format!("power rule needs 0 < beta < 1 (got {beta})")));
                }
                power_k(n, *beta)
            }
            KRule::Table { ks } => *ks
                .get(&n)
                .ok_or_else(|| KcmError::Config(format!("k table has no entry for n={n}")))?,
        };
        if k == 0 || k as usize > n.max(1) {
            return Err(KcmError::Config(format!("k rule gives k={k} for n={n}; need 1 <= k <= n")));
        }
        Ok(k)
    }

    /// Whether `k` grows with `n`.
    pub fn is_growing(&self) -> bool {
        !matches!(self, KRule::Fixed { .. })
    }
}

/// `ceil(n^beta)`, nudged down so exact powers are not pushed up by rounding.
pub fn power_k(n: usize, beta: f64) -> u32 {
    let x = (n as f64).powf(beta);
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    k.max(1.0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// Inversion count.
    #[serde(rename = "I", alias = "i")]
    I,
    /// Longest increasing subsequence length.
    #[serde(rename = "L", alias = "l")]
    L,
    /// Per-step inversion counts at a few probe times.
    #[serde(rename = "profile")]
    Profile,
    /// Length of the greedy lower-bound subsequence.
    #[serde(rename = "M", alias = "m")]
    M,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::I => "I",
            Statistic::L => "L",
            Statistic::Profile => "profile",
            Statistic::M => "M",
        })
    }
}

impl FromStr for Statistic {
    type Err = KcmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" => Ok(Statistic::I),
            "l" => Ok(Statistic::L),
            "profile" => Ok(Statistic::Profile),
            "m" => Ok(Statistic::M),
            _ => Err(KcmError::Config(format!("unknown statistic `{s}` (expected I|L|profile|M)"))),
        }
    }
}

fn default_strategy() -> String {
    "min".into()
}

fn default_statistics() -> Vec<Statistic> {
    vec![Statistic::I, Statistic::L]
}

fn default_ks_threshold() -> f64 {
    DEFAULT_KS_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Deck sizes to sweep.
    pub n: Vec<usize>,
    pub k_rule: KRule,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistic>,
    /// Sampler mode for the minimum rule; `None` picks by `k`.
    #[serde(default)]
    pub mode: Option<SamplerMode>,
    #[serde(default = "default_ks_threshold")]
    pub ks_threshold: f64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(n: usize, k_rule: KRule, trials: usize, seed: u64) -> Self {
        Self {
            n: vec![n],
            k_rule,
            strategy: default_strategy(),
            trials,
            seed,
            statistics: default_statistics(),
            mode: None,
            ks_threshold: DEFAULT_KS_THRESHOLD,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(KcmError::Config("trials must be >= 1".into()));
        }
        if self.n.is_empty() {
            return Err(KcmError::Config("at least one n is required".into()));
        }
        if self.statistics.is_empty() {
            return Err(KcmError::Config("at least one statistic is required".into()));
        }
        for &n in &self.n {
            if n == 0 {
                return Err(KcmError::Config("n must be >= 1".into()));
            }
            self.k_rule.resolve(n)?;
        }
        if self.workers == Some(0) {
            return Err(KcmError::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// A named check with the value it saw and the threshold it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Summary of one statistic at one `(n, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    pub k: u32,
    pub statistic: String,
    pub trials: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
    /// KS distance of the standardized sample to the standard normal.
    pub ks: f64,
    /// Whether `ks` used exact moments rather than sample moments.
    pub ks_exact_standardization: bool,
    pub quantiles: Quantiles,
    pub exact_mean: Option<f64>,
    pub exact_var: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl StatSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub strategy: String,
    pub seed: u64,
    pub rows: Vec<StatSummary>,
    pub note: String,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(StatSummary::passed)
    }

    pub fn row(&self, n: usize, statistic: &str) -> Option<&StatSummary> {
        self.rows.iter().find(|r| r.n == n && r.statistic == statistic)
    }

    /// One row per `(n, k, statistic)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,statistic,trials,mean,var,se,ks,verdict\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.k,
                r.statistic,
                r.trials,
                r.mean,
                r.var,
                r.se,
                r.ks,
                if r.passed() { "pass" } else { "fail" }
            ));
        }
        out
    }
}

const CALIBRATION_NOTE: &str =
    "finite-n thresholds are calibration choices; the limit laws carry no convergence rates";

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` at sweep point `point`. Feeding it to a
/// [`crate::SamplerConfig`] reproduces that replicate.
pub fn replicate_seed(master: u64, point: usize, replicate: u64) -> u64 {
    mix64(mix64(master ^ mix64(point as u64)) ^ replicate)
}

fn replicate_rng(master: u64, point: usize, replicate: u64) -> KcmRng {
    stream_rng(replicate_seed(master, point, replicate), 0)
}

/// Maps `f` over `0..count` in parallel, returning results in index order.
pub fn par_replicates<T, F>(count: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..count as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        None => run(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| KcmError::Config(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Probe times for the profile statistic.
fn profile_probes(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let mut ts: Vec<usize> = [1, n / 4, n / 2, 3 * n / 4, n - 1]
        .into_iter()
        .filter(|&t| t >= 1 && t < n)
        .collect();
    ts.dedup();
    ts
}

/// Runs every sweep point of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &StrategyRegistry) -> Result<RunSummary> {
    cfg.validate()?;
    let strategy = registry.get(&cfg.strategy)?;
    let is_min = strategy.name() == "min";
    let mut rows = Vec::new();

    for (point, &n) in cfg.n.iter().enumerate() {
        let k = cfg.k_rule.resolve(n)?;
        strategy.check_params(n, k)?;
        let sampler = KcmSampler {
            n,
            k,
            mode: cfg.mode.unwrap_or_else(|| SamplerMode::default_for(k)),
        };
        let wants = |s: Statistic| cfg.statistics.contains(&s);
        let need_perm = wants(Statistic::L) || wants(Statistic::M) || wants(Statistic::Profile) || !is_min;
        let probes = profile_probes(n);

        let per_rep: Vec<Vec<f64>> = par_replicates(cfg.trials, cfg.workers, |r| {
            let mut rng = replicate_rng(cfg.seed, point, r);
            let mut vals = Vec::with_capacity(4 + probes.len());
            if !need_perm {
                vals.push(sampler.inversions(&mut rng) as f64);
                return Ok(vals);
            }
            let perm = if is_min {
                sampler.permutation(&mut rng)
            } else {
                sample_with_strategy(strategy.as_ref(), n, k, &mut rng)?
            };
            let l = lis_length(&perm);
            vals.push(count_inversions(&perm) as f64);
            vals.push(l as f64);
            vals.push(greedy_lower_bound(&perm, k).m() as f64);
            if wants(Statistic::Profile) {
                let prof = inversion_profile(&perm);
                vals.extend(probes.iter().map(|&t| prof[t - 1] as f64));
            }
            Ok(vals)
        })?;

        let column = |idx: usize| per_rep.iter().map(|v| v[idx]).collect::<Vec<f64>>();
        let mut stats = cfg.statistics.clone();
        stats.sort();
        stats.dedup();
        for stat in stats {
            match stat {
                Statistic::I => {
                    let exact = if is_min { Some(exact_total_moments(n, k)?) } else { None };
                    rows.push(summarize(n, k, "I", &column(0), exact, cfg)?);
                }
                Statistic::L => {
                    let l = column(1);
                    let mut row = summarize(n, k, "L", &l, None, cfg)?;
                    if is_min && cfg.trials >= 2 {
                        let v = variance_bound_check(&l, n);
                        row.verdicts.push(v);
                    }
                    rows.push(row);
                }
                Statistic::M => {
                    let m = column(2);
                    let l = column(1);
                    let mut row = summarize(n, k, "M", &m, None, cfg)?;
                    let bad = m.iter().zip(&l).filter(|(m, l)| m > l).count();
                    row.verdicts.push(Verdict::new(
                        "m_le_l",
                        bad == 0,
                        bad as f64,
                        0.0,
                        "replicates with greedy M > L",
                    ));
                    rows.push(row);
                }
                Statistic::Profile => {
                    for (i, &t) in probes.iter().enumerate() {
                        let exact = if is_min { Some(exact_step_moments(n, k, t)?) } else { None };
                        rows.push(summarize(n, k, &format!("I_{t}"), &column(3 + i), exact, cfg)?);
                    }
                }
            }
        }
    }

    Ok(RunSummary {
        schema_version: SCHEMA_VERSION,
        strategy: cfg.strategy.clone(),
        seed: cfg.seed,
        rows,
        note: CALIBRATION_NOTE.into(),
    })
}

fn summarize(
    n: usize,
    k: u32,
    name: &str,
    xs: &[f64],
    exact: Option<Moments>,
    cfg: &ExperimentConfig,
) -> Result<StatSummary> {
    let (mean, var) = mean_var(xs);
    let se = (var / xs.len() as f64).sqrt();
    let mut verdicts = Vec::new();

    let exact_sd = exact.map(|m| m.sd()).filter(|&sd| sd > 0.0);
    let (ks, ks_exact) = match (exact, exact_sd) {
        (Some(m), Some(sd)) => (standardized_ks(xs, m.mean, sd)?, true),
        _ if var > 0.0 => (standardized_ks(xs, mean, var.sqrt())?, false),
        _ => (1.0, false),
    };

    if let Some(m) = exact {
        let tol = 4.0 * se;
        let dev = (mean - m.mean).abs();
        verdicts.push(Verdict::new(
            "mean_within_4se",
            dev <= tol || (se == 0.0 && dev <= 1e-9 * m.mean.abs().max(1.0)),
            dev,
            tol,
            "|sample mean - exact mean| vs 4 standard errors",
        ));
        if exact_sd.is_some() && xs.len() >= 1000 && name == "I" {
            verdicts.push(Verdict::new(
                "clt_ks",
                ks < cfg.ks_threshold,
                ks,
                cfg.ks_threshold,
                "KS distance of exactly standardized sample to N(0,1)",
            ));
        }
    }

    Ok(StatSummary {
        n,
        k,
        statistic: name.to_string(),
        trials: xs.len(),
        mean,
        var,
        se,
        ks,
        ks_exact_standardization: ks_exact,
        quantiles: quantiles(xs),
        exact_mean: exact.map(|m| m.mean),
        exact_var: exact.map(|m| m.variance),
        verdicts,
    })
}

fn standardized_ks(xs: &[f64], mean: f64, sd: f64) -> Result<f64> {
    let z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    ks_distance_normal(&z)
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(xs: &[f64]) -> Quantiles {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Quantiles {
        q05: quantile_sorted(&s, 0.05),
        q25: quantile_sorted(&s, 0.25),
        q50: quantile_sorted(&s, 0.50),
        q75: quantile_sorted(&s, 0.75),
        q95: quantile_sorted(&s, 0.95),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltVerdict {
    pub samples: usize,
    pub ks: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Standardizes with the given exact moments and compares to N(0,1).
pub fn clt_verdict(samples: &[f64], exact_mean: f64, exact_sd: f64, threshold: f64) -> Result<CltVerdict> {
    if samples.len() < 1000 {
        return Err(KcmError::Statistic(format!(
            "CLT verdict needs at least 1000 samples (got {})",
            samples.len()
        )));
    }
    if !(exact_sd.is_finite() && exact_sd > 0.0) {
        return Err(KcmError::Statistic(format!("degenerate standard deviation {exact_sd}")));
    }
    let ks = standardized_ks(samples, exact_mean, exact_sd)?;
    Ok(CltVerdict {
        samples: samples.len(),
        ks,
        threshold,
        passed: ks < threshold,
    })
}

/// Samples `trials` inversion counts under the minimum rule.
pub fn sample_inversions(n: usize, k: u32, trials: usize, seed: u64, workers: Option<usize>) -> Result<Vec<f64>> {
    let sampler = KcmSampler {
        n,
        k,
        mode: SamplerMode::default_for(k),
    };
    par_replicates(trials, workers, |r| {
        Ok(sampler.inversions(&mut replicate_rng(seed, 0, r)) as f64)
    })
}

/// CLT check for `I` at one `(n, k)`, exact moments as the centering.
pub fn clt_check(n: usize, k: u32, trials: usize, seed: u64, threshold: f64) -> Result<CltVerdict> {
    let xs = sample_inversions(n, k, trials, seed, None)?;
    let m = exact_total_moments(n, k)?;
    clt_verdict(&xs, m.mean, m.sd(), threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLawRow {
    pub n: usize,
    pub k: u32,
    pub exceedance: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLawReport {
    pub rule: KRule,
    pub eps: f64,
    pub trials: usize,
    pub rows: Vec<WeakLawRow>,
    pub final_threshold: f64,
    pub passed: bool,
}

/// For fixed `k`: fraction of replicates with `|I/n^2 - a_k| > eps`.
/// For growing `k`: fraction with `|I k_n / n^2 - 1/2| > eps`.
///
/// Passes when the fraction does not rise along the sweep (beyond two
/// binomial standard errors plus one replicate) and is at most
/// `final_threshold` at the largest `n`.
pub fn weak_law_verdict(
    ns: &[usize],
    rule: &KRule,
    eps: f64,
    trials: usize,
    seed: u64,
    final_threshold: f64,
) -> Result<WeakLawReport> {
    if ns.len() < 3 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KcmError::Config("weak-law sweep needs at least 3 increasing n values".into()));
    }
    let mut rows = Vec::new();
    for (point, &n) in ns.iter().enumerate() {
        let k = rule.resolve(n)?;
        let (target, scale) = if rule.is_growing() {
            (0.5, k as f64 / (n as f64 * n as f64))
        } else {
            (asymptotic_constants(k)?.a(), 1.0 / (n as f64 * n as f64))
        };
        let sampler = KcmSampler {
            n,
            k,
            mode: SamplerMode::default_for(k),
        };
        let ratios = par_replicates(trials, None, |r| {
            Ok(sampler.inversions(&mut replicate_rng(seed, point, r)) as f64 * scale)
        })?;
        let exceed = ratios.iter().filter(|&&x| (x - target).abs() > eps).count();
        rows.push(WeakLawRow {
            n,
            k,
            exceedance: exceed as f64 / trials as f64,
            mean_ratio: mean_var(&ratios).0,
        });
    }
    let t = trials as f64;
    let monotone = rows.windows(2).all(|w| {
        let p = w[0].exceedance;
        w[1].exceedance <= p + 2.0 * (p * (1.0 - p) / t).sqrt() + 1.0 / t
    });
    let last = rows.last().map(|r| r.exceedance).unwrap_or(1.0);
    Ok(WeakLawReport {
        rule: rule.clone(),
        eps,
        trials,
        rows,
        final_threshold,
        passed: monotone && last <= final_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceVerdict {
    pub n: usize,
    pub k: u32,
    pub trials: usize,
    pub sample_var: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

/// One-sided 0.999 slack for a sample variance: `chi2_{0.999}(N-1)/(N-1) - 1`.
pub fn variance_slack(trials: usize) -> f64 {
    let df = trials.saturating_sub(1).max(1);
    chi_square_critical(df, 1e-3) / df as f64 - 1.0
}

fn variance_bound_check(l: &[f64], n: usize) -> Verdict {
    let (_, var) = mean_var(l);
    let bound = n as f64 / 4.0 * (1.0 + variance_slack(l.len()));
    Verdict::new(
        "var_l_le_n_over_4",
        var <= bound,
        var,
        bound,
        "sample Var(L) vs n/4 with 0.999 one-sided chi-square slack",
    )
}

/// Sample variance of `L` against `n/4` inflated by the chi-square slack.
pub fn variance_l_verdict(n: usize, k: u32, trials: usize, seed: u64) -> Result<VarianceVerdict> {
    if trials < 1000 {
        return Err(KcmError::Config(format!("variance verdict needs >= 1000 trials (got {trials})")));
    }
    let ls = sample_lis(n, k, trials, seed)?;
    let (_, var) = mean_var(&ls);
    let slack = variance_slack(trials);
    let bound = n as f64 / 4.0 * (1.0 + slack);
    Ok(VarianceVerdict {
        n,
        k,
        trials,
        sample_var: var,
        bound,
        slack,
        passed: var <= bound,
    })
}

pub fn sample_lis(n: usize, k: u32, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = KcmSampler {
        n,
        k,
        mode: SamplerMode::default_for(k),
    };
    par_replicates(trials, None, |r| {
        Ok(lis_length(&sampler.permutation(&mut replicate_rng(seed, 0, r))) as f64)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub other: String,
    pub violations: usize,
    pub ties: usize,
    /// First trace on which the minimum rule lost, for replay.
    pub counterexample: Option<DrawTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n: usize,
    pub k: u32,
    pub trials: usize,
    pub rows: Vec<DominanceRow>,
    pub passed: bool,
}

/// Replays `trials` shared traces under the minimum rule and each of
/// `others`, requiring `I(min) <= I(other)` on every trace.
pub fn dominance_verdict(
    n: usize,
    k: u32,
    trials: usize,
    seed: u64,
    others: &[&dyn ChoiceStrategy],
) -> Result<DominanceReport> {
    if k < 2 {
        return Err(KcmError::Config("dominance verdict needs k >= 2".into()));
    }
    let sampler = KcmSampler {
        n,
        k,
        mode: SamplerMode::DirectDraws,
    };
    // (per other: (min_inv, other_inv)) for each trace
    let results: Vec<Vec<(u64, u64)>> = par_replicates(trials, None, |r| {
        let trace = sampler.trace(&mut replicate_rng(seed, 0, r));
        let base = count_inversions(&replay(&MinStrategy, &trace)?);
        others
            .iter()
            .map(|s| Ok((base, count_inversions(&replay(*s, &trace)?))))
            .collect()
    })?;

    let mut rows = Vec::new();
    for (j, s) in others.iter().enumerate() {
        let mut violations = 0;
        let mut ties = 0;
        let mut first_bad = None;
        for (r, res) in results.iter().enumerate() {
            let (a, b) = res[j];
            if a > b {
                violations += 1;
                first_bad.get_or_insert(r);
            } else if a == b {
                ties += 1;
            }
        }
        let counterexample = first_bad.map(|r| sampler.trace(&mut replicate_rng(seed, 0, r as u64)));
        rows.push(DominanceRow {
            other: s.name().to_string(),
            violations,
            ties,
            counterexample,
        });
    }
    let passed = rows.iter().all(|r| r.violations == 0);
    Ok(DominanceReport {
        n,
        k,
        trials,
        rows,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub n: usize,
    pub k: u32,
    pub trials: usize,
    pub eps: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub mean_greedy_ratio: f64,
    pub greedy_exceeds_l: usize,
    pub window_ok: bool,
    pub greedy_ok: bool,
    pub passed: bool,
}

/// `L / sqrt(k n)` against `[1/2 - eps, 4e + eps]` on every replicate, the
/// greedy `M <= L` on every replicate, and mean `M / sqrt(k n) >= 1/2 - eps`.
pub fn scaling_l_verdict(n: usize, k: u32, trials: usize, seed: u64, eps: f64) -> Result<ScalingReport> {
    let sampler = KcmSampler {
        n,
        k,
        mode: SamplerMode::default_for(k),
    };
    let pairs: Vec<(usize, usize)> = par_replicates(trials, None, |r| {
        let perm = sampler.permutation(&mut replicate_rng(seed, 0, r));
        Ok((lis_length(&perm), greedy_lower_bound(&perm, k).m()))
    })?;
    let scale = (k as f64 * n as f64).sqrt();
    let ratios: Vec<f64> = pairs.iter().map(|&(l, _)| l as f64 / scale).collect();
    let greedy: Vec<f64> = pairs.iter().map(|&(_, m)| m as f64 / scale).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lower = 0.5 - eps;
    let upper = 4.0 * std::f64::consts::E + eps;
    let greedy_exceeds_l = pairs.iter().filter(|&&(l, m)| m > l).count();
    let mean_greedy_ratio = mean_var(&greedy).0;
    let window_ok = min_ratio >= lower && max_ratio <= upper;
    let greedy_ok = greedy_exceeds_l == 0 && mean_greedy_ratio >= lower;
    Ok(ScalingReport {
        n,
        k,
        trials,
        eps,
        min_ratio,
        max_ratio,
        mean_ratio: mean_var(&ratios).0,
        mean_greedy_ratio,
        greedy_exceeds_l,
        window_ok,
        greedy_ok,
        passed: window_ok && greedy_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub beta: f64,
    pub points: Vec<(usize, u32, f64)>,
    pub slope: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Least-squares slope of `log(mean L)` against `log n` with `k_n = ceil(n^beta)`,
/// compared with `(1 + beta)/2`.
pub fn slope_verdict(beta: f64, ns: &[usize], trials: usize, seed: u64, tolerance: f64) -> Result<SlopeReport> {
    if ns.len() < 2 {
        return Err(KcmError::Config("slope needs at least two n values".into()));
    }
    let rule = KRule::Power { beta };
    let mut points = Vec::new();
    for &n in ns {
        let k = rule.resolve(n)?;
        let ls = sample_lis(n, k, trials, seed ^ n as u64)?;
        points.push((n, k, mean_var(&ls).0));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2.ln()).collect();
    let slope = ols_slope(&xs, &ys);
    let target = (1.0 + beta) / 2.0;
    Ok(SlopeReport {
        beta,
        points,
        slope,
        target,
        tolerance,
        passed: (slope - target).abs() <= tolerance,
    })
}

pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, _) = mean_var(xs);
    let (my, _) = mean_var(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub n: usize,
    pub trials: usize,
    pub violations: usize,
    pub changed: usize,
    pub passed: bool,
}

/// Random single-coordinate changes to a relative sequence must move `L`
/// by at most one. Base sequences come from the minimum rule with `k`
/// cycling over a few values.
pub fn perturbation_verdict(n: usize, trials: usize, seed: u64) -> Result<PerturbationReport> {
    use rand::Rng;
    const KS: [u32; 4] = [1, 2, 5, 20];
    let outcomes: Vec<(bool, bool)> = par_replicates(trials, None, |r| {
        let mut rng = replicate_rng(seed, 0, r);
        let k = KS[(r % KS.len() as u64) as usize];
        let sampler = KcmSampler {
            n,
            k,
            mode: SamplerMode::default_for(k),
        };
        let rel = sampler.relative(&mut rng);
        let t = rng.random_range(1..=n);
        let new_rank = rng.random_range(1..=(n - t + 1) as u32);
        let l0 = lis_length(&relative_to_permutation(&rel)) as i64;
        let l1 = lis_length(&relative_to_permutation(&perturb_relative(&rel, t, new_rank)?)) as i64;
        Ok(((l0 - l1).abs() > 1, l0 != l1))
    })?;
    let violations = outcomes.iter().filter(|o| o.0).count();
    Ok(PerturbationReport {
        n,
        trials,
        violations,
        changed: outcomes.iter().filter(|o| o.1).count(),
        passed: violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    pub samples: usize,
    pub statistic: f64,
    pub df: usize,
    pub critical: f64,
    pub alpha: f64,
    pub passed: bool,
}

/// Chi-square of sampled permutations against the uniform law on all `n!`
/// permutations, for a sampler or a strategy.
pub fn uniformity_verdict(
    n: usize,
    k: u32,
    strategy: Option<&dyn ChoiceStrategy>,
    samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<UniformityReport> {
    if n > 7 {
        return Err(KcmError::Size(format!("uniformity check limited to n <= 7 (got {n})")));
    }
    let sampler = KcmSampler {
        n,
        k,
        mode: SamplerMode::DirectDraws,
    };
    let perms: Vec<Vec<u32>> = par_replicates(samples, None, |r| {
        let mut rng = replicate_rng(seed, 0, r);
        let p = match strategy {
            None => sampler.permutation(&mut rng),
            Some(s) => sample_with_strategy(s, n, k, &mut rng)?,
        };
        Ok(p.into_cards())
    })?;
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for p in perms {
        *counts.entry(p).or_insert(0) += 1;
    }
    let fact: usize = (1..=n).product();
    let mut cells: Vec<u64> = counts.values().copied().collect();
    cells.resize(fact, 0);
    let probs = vec![1.0 / fact as f64; fact];
    let (statistic, df) = crate::stat_tests::chi_square_statistic(&cells, &probs, 5.0);
    let critical = chi_square_critical(df, alpha);
    Ok(UniformityReport {
        n,
        samples,
        statistic,
        df,
        critical,
        alpha,
        passed: counts.len() <= fact && statistic < critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_kcm, SamplerConfig};
    use crate::strategies::{CopyStrategy, MaxStrategy, UniformStrategy};

    #[test]
    fn k_rules() {
        assert_eq!(KRule::Fixed { k: 3 }.resolve(10).unwrap(), 3);
        assert!(KRule::Fixed { k: 11 }.resolve(10).is_err());
        assert!(KRule::Fixed { k: 0 }.resolve(10).is_err());
        assert_eq!(KRule::Power { beta: 0.5 }.resolve(100_000).unwrap(), 317);
        assert_eq!(KRule::Power { beta: 1.0 / 3.0 }.resolve(100_000).unwrap(), 47);
        assert_eq!(KRule::Power { beta: 1.0 / 3.0 }.resolve(1_000_000).unwrap(), 100);
        assert_eq!(KRule::Power { beta: 0.4 }.resolve(2000).unwrap(), 21);
        assert_eq!(KRule::Power { beta: 2.0 / 3.0 }.resolve(1000).unwrap(), 100);
        assert!(KRule::Power { beta: 1.0 }.resolve(10).is_err());
        let t = KRule::Table { ks: [(10, 2)].into_iter().collect() };
        assert_eq!(t.resolve(10).unwrap(), 2);
        assert!(t.resolve(11).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"n":[100,200],"k_rule":{"rule":"power","beta":0.5},"trials":10,"seed":3,"statistics":["I","M"]}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.strategy, "min");
        assert_eq!(cfg.statistics, vec![Statistic::I, Statistic::M]);
        assert_eq!(cfg.k_rule, KRule::Power { beta: 0.5 });
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        let reg = StrategyRegistry::with_builtins();
        let mut cfg = ExperimentConfig::new(5, KRule::Fixed { k: 6 }, 10, 0);
        assert!(matches!(run_experiment(&cfg, &reg), Err(KcmError::Config(_))));
        cfg.k_rule = KRule::Fixed { k: 2 };
        cfg.trials = 0;
        assert!(run_experiment(&cfg, &reg).is_err());
        cfg.trials = 3;
        cfg.strategy = "nope".into();
        assert!(matches!(run_experiment(&cfg, &reg), Err(KcmError::UnknownStrategy(_))));
    }

    #[test]
    fn single_trial_reproduces_sampler() {
        let reg = StrategyRegistry::with_builtins();
        let mut cfg = ExperimentConfig::new(50, KRule::Fixed { k: 3 }, 1, 42);
        cfg.statistics = vec![Statistic::I, Statistic::L];
        let summary = run_experiment(&cfg, &reg).unwrap();
        let perm = sample_kcm(&SamplerConfig::new(50, 3, replicate_seed(42, 0, 0)).unwrap());
        assert_eq!(summary.row(50, "I").unwrap().mean, count_inversions(&perm) as f64);
        assert_eq!(summary.row(50, "L").unwrap().mean, lis_length(&perm) as f64);
    }

    #[test]
    fn mean_within_standard_errors_of_exact() {
        let reg = StrategyRegistry::with_builtins();
        let mut cfg = ExperimentConfig::new(200, KRule::Fixed { k: 5 }, 10_000, 9);
        cfg.statistics = vec![Statistic::I];
        let s = run_experiment(&cfg, &reg).unwrap();
        let row = s.row(200, "I").unwrap();
        let exact = exact_total_moments(200, 5).unwrap().mean;
        assert!((row.mean - exact).abs() <= 4.0 * row.se, "{} vs {exact}", row.mean);
        assert!(row.passed(), "{:?}", row.verdicts);
    }

    #[test]
    fn summary_is_identical_across_worker_counts() {
        let reg = StrategyRegistry::with_builtins();
        let mut cfg = ExperimentConfig::new(300, KRule::Fixed { k: 4 }, 400, 77);
        cfg.n = vec![100, 300];
        cfg.statistics = vec![Statistic::I, Statistic::L, Statistic::M, Statistic::Profile];
        let mut outputs = Vec::new();
        for w in [1usize, 4, 16] {
            cfg.workers = Some(w);
            outputs.push(serde_json::to_string(&run_experiment(&cfg, &reg).unwrap()).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn standard_error_halves_when_trials_quadruple() {
        let reg = StrategyRegistry::with_builtins();
        let mut ses = Vec::new();
        for trials in [1000usize, 2000, 4000, 8000] {
            let mut cfg = ExperimentConfig::new(100, KRule::Fixed { k: 2 }, trials, 5);
            cfg.statistics = vec![Statistic::I];
            ses.push(run_experiment(&cfg, &reg).unwrap().rows[0].se);
        }
        for w in ses.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn other_strategies_run_and_m_le_l() {
        let reg = StrategyRegistry::with_builtins();
        for s in ["uniform", "max", "copy"] {
            let mut cfg = ExperimentConfig::new(30, KRule::Fixed { k: 3 }, 50, 1);
            cfg.strategy = s.into();
            cfg.statistics = vec![Statistic::I, Statistic::L, Statistic::M];
            let sum = run_experiment(&cfg, &reg).unwrap();
            assert!(sum.row(30, "I").unwrap().exact_mean.is_none());
            assert!(sum.row(30, "M").unwrap().passed());
        }
    }

    #[test]
    fn csv_has_one_row_per_statistic() {
        let reg = StrategyRegistry::with_builtins();
        let mut cfg = ExperimentConfig::new(20, KRule::Fixed { k: 2 }, 20, 1);
        cfg.statistics = vec![Statistic::I, Statistic::L];
        let csv = run_experiment(&cfg, &reg).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,k,statistic,trials,mean,var,se,ks,verdict");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("20,2,I,20,"));
    }

    #[test]
    fn clt_verdict_errors() {
        assert!(clt_verdict(&[0.0; 10], 0.0, 1.0, 0.03).is_err());
        assert!(clt_verdict(&[0.0; 2000], 0.0, 0.0, 0.03).is_err());
    }

    #[test]
    fn weak_law_degenerate_and_small() {
        assert!(weak_law_verdict(&[10, 5, 20], &KRule::Fixed { k: 1 }, 0.1, 10, 0, 0.0).is_err());
        let rep = weak_law_verdict(&[1, 2, 3], &KRule::Fixed { k: 1 }, 0.3, 20, 0, 1.0).unwrap();
        assert_eq!(rep.rows[0].mean_ratio, 0.0);
    }

    #[test]
    fn variance_of_single_card() {
        let v = variance_l_verdict(1, 3, 1000, 0).unwrap();
        assert_eq!(v.sample_var, 0.0);
        assert!(v.passed);
        assert!(variance_l_verdict(10, 2, 999, 0).is_err());
    }

    #[test]
    fn dominance_small() {
        let rep = dominance_verdict(20, 2, 500, 3, &[&UniformStrategy, &MaxStrategy, &CopyStrategy]).unwrap();
        assert!(rep.passed);
        let rep = dominance_verdict(20, 2, 100, 3, &[&MinStrategy]).unwrap();
        assert_eq!(rep.rows[0].ties, 100);
        assert!(dominance_verdict(20, 1, 10, 3, &[&MaxStrategy]).is_err());
    }

    #[test]
    fn uniformity_of_k_one_and_uniform_strategy() {
        assert!(uniformity_verdict(4, 1, None, 20_000, 8, 1e-3).unwrap().passed);
        let u = uniformity_verdict(4, 3, Some(&UniformStrategy), 20_000, 8, 1e-3).unwrap();
        assert!(u.passed, "{u:?}");
        // the minimum rule with k=3 is far from uniform
        assert!(!uniformity_verdict(4, 3, None, 20_000, 8, 1e-3).unwrap().passed);
    }

    #[test]
    fn ols_recovers_slope() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 3.5, 5.0];
        assert!((ols_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolation() {
        let q = quantiles(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(q.q50, 3.0);
        assert_eq!(q.q25, 2.0);
        assert!((q.q05 - 1.2).abs() < 1e-12);
    }
}
