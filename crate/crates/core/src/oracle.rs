//! Exact ground truth at small scale.
//!
//! * The law of `I` under the minimum rule, by convolving the independent
//!   per-step laws (floating point, or exact integer counts over the common
//!   denominator `prod_m m^k`).
//! * Exhaustive enumeration of the removal process under any strategy,
//!   over every ordered draw tuple at every step. All leaves are equally
//!   likely, so exact laws are integer counts over the leaf total.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{KcmError, Result};
use crate::law::{checked_pow, rank_count, rank_pmf};
use crate::model::{relative_to_permutation, Permutation, RelativeSeq};
use crate::numeric::KahanSum;
use crate::stats::{count_inversions, lis_length};
use crate::strategies::{ChoiceStrategy, StrategyContext};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest deck accepted by the convolution oracle.
pub const PMF_MAX_N: usize = 2000;

/// Largest leaf count `(n!)^k` accepted by exhaustive enumeration.
pub const ENUMERATION_MAX_LEAVES: u128 = 2_000_000;

/// Largest deck for the relative-sequence route to `E(L)`.
pub const EXACT_E_L_MAX_N: usize = 9;

/// A probability vector over `support_offset, support_offset + 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPmf {
    #[serde(rename = "offset")]
    pub support_offset: i64,
    pub probs: Vec<f64>,
}

impl ExactPmf {
    pub fn point(at: i64) -> Self {
        Self {
            support_offset: at,
            probs: vec![1.0],
        }
    }

    pub fn prob(&self, x: i64) -> f64 {
        let i = x - self.support_offset;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().copied().collect::<KahanSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.support_offset + i as i64) as f64 * p)
            .collect::<KahanSum>()
            .value()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = (self.support_offset + i as i64) as f64 - mu;
                d * d * p
            })
            .collect::<KahanSum>()
            .value()
    }

    /// Convolution with another pmf (law of the independent sum).
    pub fn convolve(&self, other: &ExactPmf) -> ExactPmf {
        ExactPmf {
            support_offset: self.support_offset + other.support_offset,
            probs: convolve_f64(&self.probs, &other.probs),
        }
    }

    /// `sum_x |p(x) - q(x)| / 2`.
    pub fn total_variation(&self, other: &ExactPmf) -> f64 {
        let lo = self.support_offset.min(other.support_offset);
        let hi = (self.support_offset + self.probs.len() as i64).max(other.support_offset + other.probs.len() as i64);
        (lo..hi)
            .map(|x| (self.prob(x) - other.prob(x)).abs())
            .collect::<KahanSum>()
            .value()
            / 2.0
    }
}

fn convolve_f64(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let body = |x: usize| {
        let lo = x.saturating_sub(a.len() - 1);
        let hi = x.min(b.len() - 1);
        (lo..=hi).map(|j| a[x - j] * b[j]).sum::<f64>()
    };
    if a.len() * b.len() > 1 << 16 {
        (0..out_len).into_par_iter().map(body).collect()
    } else {
        (0..out_len).map(body).collect()
    }
}

/// Law of the per-step inversion count with `m` cards left.
fn step_pmf(m: u64, k: u32) -> ExactPmf {
    let mut probs: Vec<f64> = (1..=m).map(|j| rank_pmf(m, k, j)).collect();
    while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
        probs.pop();
    }
    ExactPmf {
        support_offset: 0,
        probs,
    }
}

fn check_pmf_args(n: usize, k: u32) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(KcmError::Config(format!("need n >= 1 and k >= 1 (got n={n}, k={k})")));
    }
    if n > PMF_MAX_N {
        return Err(KcmError::Size(format!("exact pmf of I limited to n <= {PMF_MAX_N} (got {n})")));
    }
    Ok(())
}

/// Law of `I` under the minimum rule, as the convolution of the `n - 1`
/// independent per-step laws.
pub fn exact_pmf_i(n: usize, k: u32) -> Result<ExactPmf> {
    let mut last = None;
    exact_pmf_ladder(n, k, |_, pmf| last = Some(pmf.clone()))?;
    Ok(last.expect("n >= 1"))
}

/// Calls `visit(n, pmf)` for every deck size `1..=n_max`, reusing each
/// convolution for the next size (the step laws depend only on the number
/// of cards left).
pub fn exact_pmf_ladder<F>(n_max: usize, k: u32, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &ExactPmf),
{
    check_pmf_args(n_max, k)?;
    let mut acc = ExactPmf::point(0);
    visit(1, &acc);
    for m in 2..=n_max {
        acc = acc.convolve(&step_pmf(m as u64, k));
        visit(m, &acc);
    }
    Ok(())
}

/// Exact law of a nonnegative integer statistic: `counts[x] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountPmf {
    pub counts: Vec<u128>,
    pub denominator: u128,
}

impl CountPmf {
    pub fn prob(&self, x: usize) -> Ratio<u128> {
        Ratio::new(self.counts.get(x).copied().unwrap_or(0), self.denominator)
    }
}

/// The law of `I` in exact integer arithmetic.
pub fn exact_pmf_i_counts(n: usize, k: u32) -> Result<CountPmf> {
    check_pmf_args(n, k)?;
    let mut counts = vec![1u128];
    let mut denominator = 1u128;
    for m in 2..=n as u64 {
        let step: Vec<u128> = (1..=m).map(|j| rank_count(m, k, j)).collect::<Result<_>>()?;
        let mut next = vec![0u128; counts.len() + step.len() - 1];
        for (i, &a) in counts.iter().enumerate() {
            for (j, &b) in step.iter().enumerate() {
                let term = a.checked_mul(b).ok_or_else(overflow)?;
                next[i + j] = next[i + j].checked_add(term).ok_or_else(overflow)?;
            }
        }
        counts = next;
        denominator = denominator
            .checked_mul(checked_pow(u128::from(m), k)?)
            .ok_or_else(overflow)?;
    }
    Ok(CountPmf { counts, denominator })
}

fn overflow() -> KcmError {
    KcmError::Size("exact counts overflow 128-bit arithmetic".into())
}

/// Exact joint law of `(I, L)` (and of the permutation itself) under a strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationResult {
    pub n: usize,
    pub k: u32,
    pub strategy: String,
    /// Number of equally likely leaves, `prod_{m=1}^{n} m^k`.
    pub leaves: u128,
    pub joint: BTreeMap<(u64, usize), u128>,
    pub permutations: BTreeMap<Vec<u32>, u128>,
    /// For the minimum rule: whether the `I` marginal equals the convolution law.
    pub min_cross_check: Option<bool>,
}

impl EnumerationResult {
    pub fn prob(&self, inversions: u64, lis: usize) -> Ratio<u128> {
        Ratio::new(self.joint.get(&(inversions, lis)).copied().unwrap_or(0), self.leaves)
    }

    pub fn permutation_prob(&self, perm: &Permutation) -> Ratio<u128> {
        Ratio::new(self.permutations.get(perm.cards()).copied().unwrap_or(0), self.leaves)
    }

    pub fn marginal_i(&self) -> BTreeMap<u64, u128> {
        let mut out = BTreeMap::new();
        for (&(i, _), &c) in &self.joint {
            *out.entry(i).or_insert(0) += c;
        }
        out
    }

    pub fn marginal_l(&self) -> BTreeMap<usize, u128> {
        let mut out = BTreeMap::new();
        for (&(_, l), &c) in &self.joint {
            *out.entry(l).or_insert(0) += c;
        }
        out
    }

    /// Marginal of `I` as dense counts over `0..=max`.
    pub fn marginal_i_dense(&self) -> Vec<u128> {
        let m = self.marginal_i();
        let max = m.keys().next_back().copied().unwrap_or(0) as usize;
        let mut out = vec![0u128; max + 1];
        for (i, c) in m {
            out[i as usize] = c;
        }
        out
    }

    /// `P(L >= x)` as an exact count over `leaves`.
    pub fn l_survival_count(&self, x: usize) -> u128 {
        self.marginal_l().range(x..).map(|(_, &c)| c).sum()
    }

    /// `P(I <= x)` as an exact count over `leaves`.
    pub fn i_cdf_count(&self, x: u64) -> u128 {
        self.marginal_i().range(..=x).map(|(_, &c)| c).sum()
    }

    pub fn mean_i(&self) -> Ratio<u128> {
        self.marginal_moment(self.marginal_i().into_iter().map(|(i, c)| (i as u128, c)), 1)
    }

    pub fn mean_l(&self) -> Ratio<u128> {
        self.marginal_moment(self.marginal_l().into_iter().map(|(l, c)| (l as u128, c)), 1)
    }

    pub fn variance_i(&self) -> f64 {
        let m = ratio_f64(self.mean_i());
        let sq = ratio_f64(self.marginal_moment(self.marginal_i().into_iter().map(|(i, c)| (i as u128, c)), 2));
        sq - m * m
    }

    pub fn variance_l(&self) -> f64 {
        let m = ratio_f64(self.mean_l());
        let sq = ratio_f64(self.marginal_moment(self.marginal_l().into_iter().map(|(l, c)| (l as u128, c)), 2));
        sq - m * m
    }

    fn marginal_moment(&self, it: impl Iterator<Item = (u128, u128)>, power: u32) -> Ratio<u128> {
        let num: u128 = it.map(|(x, c)| x.pow(power) * c).sum();
        Ratio::new(num, self.leaves)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let joint: Vec<_> = self
            .joint
            .iter()
            .map(|(&(i, l), &c)| {
                let r = Ratio::new(c, self.leaves);
                json!([i, l, big_int(*r.numer()), big_int(*r.denom())])
            })
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "k": self.k,
            "strategy": self.strategy,
            "leaves": big_int(self.leaves),
            "joint": joint,
            "mean_i": ratio_f64(self.mean_i()),
            "var_i": self.variance_i(),
            "mean_l": ratio_f64(self.mean_l()),
            "var_l": self.variance_l(),
            "min_cross_check": self.min_cross_check,
        })
    }
}

/// A JSON number when it fits in `u64`, otherwise a decimal string.
fn big_int(x: u128) -> serde_json::Value {
    u64::try_from(x).map(|v| json!(v)).unwrap_or_else(|_| json!(x.to_string()))
}

fn ratio_f64(r: Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Leaf count `prod_{m=1}^{n} m^k = (n!)^k`, or `None` on overflow.
pub fn enumeration_leaves(n: usize, k: u32) -> Option<u128> {
    let mut acc = 1u128;
    for m in 1..=n as u128 {
        acc = acc.checked_mul(m.checked_pow(k)?)?;
    }
    Some(acc)
}

/// Walks every ordered draw tuple at every step under `strategy`.
pub fn enumerate_strategy(n: usize, k: u32, strategy: &dyn ChoiceStrategy) -> Result<EnumerationResult> {
    if n == 0 || k == 0 {
        return Err(KcmError::Config(format!("need n >= 1 and k >= 1 (got n={n}, k={k})")));
    }
    let leaves = enumeration_leaves(n, k)
        .filter(|&l| l <= ENUMERATION_MAX_LEAVES)
        .ok_or_else(|| {
            KcmError::Size(format!(
                "enumeration of (n!)^k leaves for n={n}, k={k} exceeds {ENUMERATION_MAX_LEAVES}"
            ))
        })?;
    strategy.check_params(n, k)?;

    let first_tuples = (n as u128).pow(k) as usize;
    let partials: Vec<Tally> = (0..first_tuples)
        .into_par_iter()
        .map(|code| {
            let mut walker = Walker::new(n, k, strategy);
            walker.step_with_code(code)?;
            Ok(walker.tally)
        })
        .collect::<Result<_>>()?;

    let mut tally = Tally::default();
    for p in partials {
        tally.merge(p);
    }
    debug_assert_eq!(tally.permutations.values().sum::<u128>(), leaves);

    let mut result = EnumerationResult {
        n,
        k,
        strategy: strategy.name().to_string(),
        leaves,
        joint: tally.joint,
        permutations: tally.permutations,
        min_cross_check: None,
    };
    if strategy.name() == "min" {
        let conv = exact_pmf_i_counts(n, k)?;
        let mut counts = conv.counts;
        while counts.len() > 1 && *counts.last().unwrap() == 0 {
            counts.pop();
        }
        result.min_cross_check = Some(conv.denominator == leaves && counts == result.marginal_i_dense());
    }
    Ok(result)
}

#[derive(Default)]
struct Tally {
    joint: BTreeMap<(u64, usize), u128>,
    permutations: BTreeMap<Vec<u32>, u128>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        for (key, c) in other.joint {
            *self.joint.entry(key).or_insert(0) += c;
        }
        for (key, c) in other.permutations {
            *self.permutations.entry(key).or_insert(0) += c;
        }
    }
}

struct Walker<'a> {
    n: usize,
    k: u32,
    strategy: &'a dyn ChoiceStrategy,
    /// Remaining cards, ascending.
    deck: Vec<u32>,
    history: Vec<u32>,
    tally: Tally,
}

impl<'a> Walker<'a> {
    fn new(n: usize, k: u32, strategy: &'a dyn ChoiceStrategy) -> Self {
        Self {
            n,
            k,
            strategy,
            deck: (1..=n as u32).collect(),
            history: Vec::with_capacity(n),
            tally: Tally::default(),
        }
    }

    /// Applies the draw tuple numbered `code` (base-`m` digits) at the
    /// current step, then explores everything below it.
    fn step_with_code(&mut self, mut code: usize) -> Result<()> {
        let m = self.deck.len();
        let mut draws = Vec::with_capacity(self.k as usize);
        for _ in 0..self.k {
            draws.push(self.deck[code % m]);
            code /= m;
        }
        let chosen = {
            let ctx = StrategyContext {
                n: self.n,
                k: self.k,
                history: &self.history,
                draws: &draws,
            };
            self.strategy.choose(&ctx)?
        };
        if !draws.contains(&chosen) {
            return Err(KcmError::Contract {
                strategy: self.strategy.name().to_string(),
                t: self.history.len() + 1,
                reason: format!("returned card {chosen}, offered {draws:?}"),
            });
        }
        let at = self.deck.binary_search(&chosen).expect("draws come from deck");
        self.deck.remove(at);
        self.history.push(chosen);
        self.explore()?;
        self.history.pop();
        self.deck.insert(at, chosen);
        Ok(())
    }

    fn explore(&mut self) -> Result<()> {
        if self.deck.is_empty() {
            let perm = Permutation::from_valid(self.history.clone());
            let key = (count_inversions(&perm), lis_length(&perm));
            *self.tally.joint.entry(key).or_insert(0) += 1;
            *self.tally.permutations.entry(perm.into_cards()).or_insert(0) += 1;
            return Ok(());
        }
        let tuples = self.deck.len().pow(self.k);
        for code in 0..tuples {
            self.step_with_code(code)?;
        }
        Ok(())
    }
}

/// Exact `E(L)` under the minimum rule by summing over all relative
/// sequences, each weighted by the product of its per-step probabilities.
pub fn exact_e_l(n: usize, k: u32) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(KcmError::Config(format!("need n >= 1 and k >= 1 (got n={n}, k={k})")));
    }
    if n > EXACT_E_L_MAX_N {
        return Err(KcmError::Size(format!("exact E(L) limited to n <= {EXACT_E_L_MAX_N} (got {n})")));
    }
    let laws: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let m = (n - i) as u64;
            (1..=m).map(|j| rank_pmf(m, k, j)).collect()
        })
        .collect();
    let mut acc = KahanSum::new();
    let mut ranks = vec![1u32; n];
    walk_relative(&laws, 0, 1.0, &mut ranks, &mut acc);
    Ok(acc.value())
}

fn walk_relative(laws: &[Vec<f64>], depth: usize, weight: f64, ranks: &mut Vec<u32>, acc: &mut KahanSum) {
    if depth == laws.len() {
        let perm = relative_to_permutation(&RelativeSeq::from_valid(ranks.clone()));
        acc.add(weight * lis_length(&perm) as f64);
        return;
    }
    for (j, &p) in laws[depth].iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        ranks[depth] = j as u32 + 1;
        walk_relative(laws, depth + 1, weight * p, ranks, acc);
    }
}

/// `E(L)` for the minimum rule read off full strategy enumeration.
pub fn exact_e_l_by_enumeration(n: usize, k: u32) -> Result<Ratio<u128>> {
    Ok(enumerate_strategy(n, k, &crate::strategies::MinStrategy)?.mean_l())
}

/// Reduces `count / denom` for export.
pub fn reduced(count: u128, denom: u128) -> (u128, u128) {
    let g = count.gcd(&denom).max(1);
    (count / g, denom / g)
}
