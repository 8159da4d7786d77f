//! Named verification suites. Each suite runs a fixed set of checks with
//! pinned tolerances and reports every check by name.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::experiments::{
    clt_check, dominance_verdict, perturbation_verdict, scaling_l_verdict, slope_verdict, uniformity_verdict,
    variance_l_verdict, weak_law_verdict, KRule, DEFAULT_KS_THRESHOLD,
};
use crate::oracle::{enumerate_strategy, exact_e_l, exact_e_l_by_enumeration, exact_pmf_i, exact_pmf_i_counts};
use crate::stats::{asymptotic_constants, exact_total_moments};
use crate::strategies::{CopyStrategy, MaxStrategy, MinStrategy, UniformStrategy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "moments")]
    Moments,
    #[serde(rename = "clt")]
    Clt,
    #[serde(rename = "weaklaw")]
    WeakLaw,
    #[serde(rename = "varL")]
    VarL,
    #[serde(rename = "scalingL")]
    ScalingL,
    #[serde(rename = "dominance")]
    Dominance,
    #[serde(rename = "perturbation")]
    Perturbation,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Moments,
        Suite::Clt,
        Suite::WeakLaw,
        Suite::VarL,
        Suite::ScalingL,
        Suite::Dominance,
        Suite::Perturbation,
        Suite::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Moments => "moments",
            Suite::Clt => "clt",
            Suite::WeakLaw => "weaklaw",
            Suite::VarL => "varL",
            Suite::ScalingL => "scalingL",
            Suite::Dominance => "dominance",
            Suite::Perturbation => "perturbation",
            Suite::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = KcmError;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                KcmError::Config(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Seeds and sample sizes for the suites. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub ks_threshold: f64,
    pub clt_trials: usize,
    pub weaklaw_trials: usize,
    pub var_trials: usize,
    pub scaling_trials: usize,
    pub slope_trials: usize,
    pub dominance_trials: usize,
    pub perturbation_trials: usize,
    pub uniformity_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            ks_threshold: DEFAULT_KS_THRESHOLD,
            clt_trials: 5000,
            weaklaw_trials: 200,
            var_trials: 5000,
            scaling_trials: 200,
            slope_trials: 200,
            dominance_trials: 10_000,
            perturbation_trials: 100_000,
            uniformity_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            suite,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Plain-text table, one check per line.
    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("suite {}\n", self.suite);
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<width$}  {}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            ));
        }
        out.push_str(&format!("  {}\n", if self.passed { "all checks passed" } else { "FAILED" }));
        out
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Moments => moments_checks()?,
        Suite::Clt => clt_checks(cfg)?,
        Suite::WeakLaw => weak_law_checks(cfg)?,
        Suite::VarL => var_l_checks(cfg)?,
        Suite::ScalingL => scaling_checks(cfg)?,
        Suite::Dominance => dominance_checks(cfg)?,
        Suite::Perturbation => perturbation_checks(cfg)?,
        Suite::Oracle => oracle_checks(cfg)?,
    };
    Ok(SuiteReport::new(suite, checks))
}

/// `|E(I) - a_k n^2| <= 2n` for `n` in `ns`.
pub fn mean_expansion_check(k: u32, n: usize) -> Result<Check> {
    let a = asymptotic_constants(k)?.a();
    let nf = n as f64;
    let dev = (exact_total_moments(n, k)?.mean - a * nf * nf).abs();
    Ok(Check::new(
        format!("mean_expansion_k{k}_n{n}"),
        dev <= 2.0 * nf,
        format!("|E(I) - a_k n^2| = {dev:.3} vs 2n = {}", 2 * n),
    ))
}

/// `|Var(I) - b_k n^3| / n^2` at `n`.
pub fn variance_remainder(k: u32, n: usize) -> Result<f64> {
    let b = asymptotic_constants(k)?.b();
    let nf = n as f64;
    Ok((exact_total_moments(n, k)?.variance - b * nf.powi(3)).abs() / (nf * nf))
}

/// Calibrates `C = 2 |Var(I) - b_k n^3| / n^2` at `n_cal` and checks the
/// remainder at `n_check` stays within `C n^2`.
pub fn variance_expansion_check(k: u32, n_cal: usize, n_check: usize) -> Result<Check> {
    let c = 2.0 * variance_remainder(k, n_cal)?;
    let r = variance_remainder(k, n_check)?;
    Ok(Check::new(
        format!("variance_expansion_k{k}_n{n_check}"),
        r <= c,
        format!("|Var(I) - b_k n^3|/n^2 = {r:.5} vs C = {c:.5} (2x value at n={n_cal})"),
    ))
}

/// Normalized exact moments under `k_n = ceil(sqrt n)`.
pub fn growing_k_check(n: usize) -> Result<Check> {
    let k = KRule::Power { beta: 0.5 }.resolve(n)?;
    let m = exact_total_moments(n, k)?;
    let nf = n as f64;
    let kf = k as f64;
    let mean_ratio = m.mean * kf / (nf * nf);
    let var_ratio = m.variance * kf * kf / nf.powi(3);
    Ok(Check::new(
        format!("growing_k_n{n}"),
        (0.45..=0.55).contains(&mean_ratio) && (0.28..=0.38).contains(&var_ratio),
        format!("k={k}: E(I) k/n^2 = {mean_ratio:.5} in [0.45,0.55], Var(I) k^2/n^3 = {var_ratio:.5} in [0.28,0.38]"),
    ))
}

fn moments_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for k in [1, 2, 5] {
        for n in [1000, 10_000] {
            checks.push(mean_expansion_check(k, n)?);
        }
        checks.push(variance_expansion_check(k, 1000, 10_000)?);
    }
    checks.push(growing_k_check(100_000)?);
    Ok(checks)
}

fn clt_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let n = 2000;
    let growing = KRule::Power { beta: 0.4 }.resolve(n)?;
    let mut checks = Vec::new();
    for (label, k) in [("fixed", 4), ("growing", growing)] {
        let v = clt_check(n, k, cfg.clt_trials, cfg.seed ^ u64::from(k), cfg.ks_threshold)?;
        checks.push(Check::new(
            format!("clt_{label}_n{n}_k{k}"),
            v.passed,
            format!("KS = {:.4} vs {} over {} samples", v.ks, v.threshold, v.samples),
        ));
    }
    Ok(checks)
}

fn weak_law_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let ns = [1000, 10_000, 100_000];
    let mut checks = Vec::new();
    for (label, rule, eps) in [
        ("fixed_k2", KRule::Fixed { k: 2 }, 0.02),
        ("growing_sqrt", KRule::Power { beta: 0.5 }, 0.05),
    ] {
        let rep = weak_law_verdict(&ns, &rule, eps, cfg.weaklaw_trials, cfg.seed, 0.0)?;
        let table: Vec<String> = rep
            .rows
            .iter()
            .map(|r| format!("n={} k={} exceed={:.3}", r.n, r.k, r.exceedance))
            .collect();
        checks.push(Check::new(format!("weaklaw_{label}"), rep.passed, table.join("; ")));
    }
    Ok(checks)
}

fn var_l_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for k in [1, 10] {
        let v = variance_l_verdict(1000, k, cfg.var_trials, cfg.seed ^ u64::from(k))?;
        checks.push(Check::new(
            format!("var_l_n1000_k{k}"),
            v.passed,
            format!("sample Var(L) = {:.2} vs n/4 (1+slack) = {:.2}", v.sample_var, v.bound),
        ));
    }
    Ok(checks)
}

fn scaling_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let n = 100_000;
    let k = KRule::Power { beta: 1.0 / 3.0 }.resolve(n)?;
    let rep = scaling_l_verdict(n, k, cfg.scaling_trials, cfg.seed, 0.1)?;
    let mut checks = vec![
        Check::new(
            format!("l_window_n{n}_k{k}"),
            rep.window_ok,
            format!(
                "L/sqrt(kn) in [{:.4}, {:.4}] vs [0.4, 4e+0.1]",
                rep.min_ratio, rep.max_ratio
            ),
        ),
        Check::new(
            format!("greedy_lower_bound_n{n}_k{k}"),
            rep.greedy_ok,
            format!(
                "M > L on {} replicates; mean M/sqrt(kn) = {:.4} vs 0.4",
                rep.greedy_exceeds_l, rep.mean_greedy_ratio
            ),
        ),
    ];
    for beta in [1.0 / 3.0, 2.0 / 3.0] {
        let s = slope_verdict(beta, &[1000, 10_000, 100_000], cfg.slope_trials, cfg.seed, 0.05)?;
        checks.push(Check::new(
            format!("slope_beta_{beta:.3}"),
            s.passed,
            format!("slope = {:.4} vs (1+beta)/2 = {:.4} +- 0.05", s.slope, s.target),
        ));
    }
    Ok(checks)
}

fn dominance_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (n, k) in [(20, 2), (100, 3), (1000, 8)] {
        let rep = dominance_verdict(
            n,
            k,
            cfg.dominance_trials,
            cfg.seed,
            &[&UniformStrategy, &MaxStrategy, &CopyStrategy],
        )?;
        for row in &rep.rows {
            let mut detail = format!("{} violations over {} traces", row.violations, rep.trials);
            if let Some(trace) = &row.counterexample {
                detail.push_str(&format!("; first: {}", serde_json::to_string(trace).unwrap_or_default()));
            }
            checks.push(Check::new(
                format!("min_le_{}_n{n}_k{k}", row.other),
                row.violations == 0,
                detail,
            ));
        }
    }
    checks.push(exact_cdf_dominance_check(4, 2)?);
    Ok(checks)
}

/// `P_min(I <= x) >= P_uniform(I <= x)` for all `x`, by enumeration.
pub fn exact_cdf_dominance_check(n: usize, k: u32) -> Result<Check> {
    let min = enumerate_strategy(n, k, &MinStrategy)?;
    let uni = enumerate_strategy(n, k, &UniformStrategy)?;
    let max_i = (n * (n - 1) / 2) as u64;
    let bad: Vec<u64> = (0..=max_i)
        .filter(|&x| min.i_cdf_count(x) < uni.i_cdf_count(x))
        .collect();
    Ok(Check::new(
        format!("exact_cdf_min_vs_uniform_n{n}_k{k}"),
        bad.is_empty(),
        format!("CDF violations at x = {bad:?}"),
    ))
}

fn perturbation_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    [10, 100, 1000]
        .into_iter()
        .map(|n| {
            let rep = perturbation_verdict(n, cfg.perturbation_trials, cfg.seed ^ n as u64)?;
            Ok(Check::new(
                format!("perturbation_n{n}"),
                rep.passed,
                format!(
                    "{} of {} perturbations moved L by more than 1 ({} changed L)",
                    rep.violations, rep.trials, rep.changed
                ),
            ))
        })
        .collect()
}

/// The `I` marginal of the enumerated minimum rule equals the convolution
/// law as exact rationals.
pub fn enumeration_matches_pmf_check(n: usize, k: u32) -> Result<Check> {
    let en = enumerate_strategy(n, k, &MinStrategy)?;
    let exact = exact_pmf_i_counts(n, k)?;
    let marg = en.marginal_i_dense();
    let len = marg.len().max(exact.counts.len());
    let mismatches: Vec<usize> = (0..len)
        .filter(|&x| Ratio::new(marg.get(x).copied().unwrap_or(0), en.leaves) != exact.prob(x))
        .collect();
    Ok(Check::new(
        format!("enumeration_vs_pmf_n{n}_k{k}"),
        mismatches.is_empty(),
        format!("{} leaves; mismatched support points {mismatches:?}", en.leaves),
    ))
}

/// `P_copy(L >= x) >= P_min(L >= x)` for all `x`, strict somewhere.
pub fn copy_improvement_check(n: usize, k: u32) -> Result<Check> {
    let min = enumerate_strategy(n, k, &MinStrategy)?;
    let copy = enumerate_strategy(n, k, &CopyStrategy)?;
    let weak = (1..=n).all(|x| copy.l_survival_count(x) >= min.l_survival_count(x));
    let strict: Vec<usize> = (1..=n)
        .filter(|&x| copy.l_survival_count(x) > min.l_survival_count(x))
        .collect();
    Ok(Check::new(
        format!("copy_beats_min_l_n{n}_k{k}"),
        weak && !strict.is_empty(),
        format!(
            "E(L): copy {} vs min {}; strict at x = {strict:?}",
            copy.mean_l(),
            min.mean_l()
        ),
    ))
}

fn oracle_checks(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (n, k) in [(4, 2), (5, 2), (4, 3)] {
        checks.push(enumeration_matches_pmf_check(n, k)?);
    }
    checks.push(copy_improvement_check(4, 2)?);

    let u = uniformity_verdict(4, 1, None, cfg.uniformity_samples, cfg.seed, 1e-3)?;
    checks.push(Check::new(
        "uniform_k1_n4",
        u.passed,
        format!("chi2 = {:.2} (df {}) vs critical {:.2}", u.statistic, u.df, u.critical),
    ));

    let pmf = exact_pmf_i(60, 3)?;
    let m = exact_total_moments(60, 3)?;
    let ok = (pmf.mean() - m.mean).abs() <= 1e-9 * m.mean && (pmf.variance() - m.variance).abs() <= 1e-9 * m.variance;
    checks.push(Check::new(
        "pmf_moments_n60_k3",
        ok,
        format!("pmf mean {:.9} vs {:.9}; var {:.6} vs {:.6}", pmf.mean(), m.mean, pmf.variance(), m.variance),
    ));

    let direct = exact_e_l(5, 2)?;
    let enumerated = exact_e_l_by_enumeration(5, 2)?;
    let e = *enumerated.numer() as f64 / *enumerated.denom() as f64;
    checks.push(Check::new(
        "expected_lis_n5_k2",
        (direct - e).abs() <= 1e-12,
        format!("relative-sequence route {direct:.12} vs enumeration {e:.12}"),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!(matches!("bogus".parse::<Suite>(), Err(KcmError::Config(_))));
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let cfg: VerifyConfig = serde_json::from_str(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.clt_trials, 5000);
    }

    #[test]
    fn oracle_suite_passes() {
        let cfg = VerifyConfig {
            uniformity_samples: 20_000,
            ..VerifyConfig::default()
        };
        let rep = run_suite(Suite::Oracle, &cfg).unwrap();
        assert!(rep.passed, "{}", rep.to_table());
        assert!(rep.to_table().contains("enumeration_vs_pmf_n4_k2"));
    }

    #[test]
    fn k_one_variance_remainder_is_stable() {
        // Var = (2n^3 + 3n^2 - 5n)/72 against n^3/36
        let r = variance_remainder(1, 1000).unwrap();
        assert!((r - (3.0 - 5.0 / 1000.0) / 72.0).abs() < 1e-9, "{r}");
    }
}
