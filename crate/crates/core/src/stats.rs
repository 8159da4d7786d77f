//! Order statistics of permutations and exact inversion moments.

use std::collections::VecDeque;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::law::rank_tail;
use crate::model::{Permutation, RelativeSeq};
use crate::numeric::KahanSum;

/// Inversion count via merge sort, `O(n log n)`.
pub fn count_inversions(perm: &Permutation) -> u64 {
    let mut buf: Vec<u32> = perm.cards().to_vec();
    let mut scratch = vec![0u32; buf.len()];
    merge_count(&mut buf, &mut scratch)
}

fn merge_count(xs: &mut [u32], scratch: &mut [u32]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = xs.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        merge_count(l, sl) + merge_count(r, sr)
    };
    let (mut i, mut j, mut o) = (0, mid, 0);
    while i < mid && j < n {
        if xs[i] <= xs[j] {
            scratch[o] = xs[i];
            i += 1;
        } else {
            scratch[o] = xs[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        o += 1;
    }
    scratch[o..o + mid - i].copy_from_slice(&xs[i..mid]);
    o += mid - i;
    scratch[o..o + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&scratch[..n]);
    inv
}

/// Adjacent-transposition distance to the identity; same as the inversion count.
pub fn adjacent_transposition_distance(perm: &Permutation) -> u64 {
    count_inversions(perm)
}

/// `I_t = |{tau > t : C_t > C_tau}|` for `t = 1..n-1`.
pub fn inversion_profile(perm: &Permutation) -> Vec<u64> {
    let n = perm.n();
    // Fenwick over card values seen so far, scanning from the end.
    let mut tree = vec![0u32; n + 1];
    let mut profile = vec![0u64; n];
    for (i, &c) in perm.cards().iter().enumerate().rev() {
        let mut q = c as usize - 1;
        let mut smaller = 0u64;
        while q > 0 {
            smaller += u64::from(tree[q]);
            q &= q - 1;
        }
        profile[i] = smaller;
        let mut p = c as usize;
        while p <= n {
            tree[p] += 1;
            p += p & p.wrapping_neg();
        }
    }
    profile.truncate(n - 1);
    profile
}

/// Length of the longest strictly increasing subsequence (patience sorting).
pub fn lis_length(perm: &Permutation) -> usize {
    let mut tops: Vec<u32> = Vec::new();
    for &c in perm.cards() {
        let pile = tops.partition_point(|&top| top < c);
        if pile == tops.len() {
            tops.push(c);
        } else {
            tops[pile] = c;
        }
    }
    tops.len()
}

/// Reinsertion distance to the identity: `n - L`.
pub fn reinsertion_distance(perm: &Permutation) -> usize {
    perm.n() - lis_length(perm)
}

/// Fixed-`k` coefficients: `E(I) ~ a_k n^2` and `Var(I) ~ b_k n^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsymptoticConstants {
    pub a_k: Ratio<u128>,
    pub b_k: Ratio<u128>,
}

impl AsymptoticConstants {
    pub fn a(&self) -> f64 {
        ratio_f64(self.a_k)
    }

    pub fn b(&self) -> f64 {
        ratio_f64(self.b_k)
    }
}

impl Serialize for AsymptoticConstants {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("AsymptoticConstants", 4)?;
        st.serialize_field("a_k", &self.a_k.to_string())?;
        st.serialize_field("b_k", &self.b_k.to_string())?;
        st.serialize_field("a_k_f64", &self.a())?;
        st.serialize_field("b_k_f64", &self.b())?;
        st.end()
    }
}

fn ratio_f64(r: Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `a_k = 1/(2(k+1))`, `b_k = k/(3(k+1)^2(k+2))`.
pub fn asymptotic_constants(k: u32) -> Result<AsymptoticConstants> {
    if k == 0 {
        return Err(KcmError::Config("k must be >= 1".into()));
    }
    let k = u128::from(k);
    Ok(AsymptoticConstants {
        a_k: Ratio::new(1, 2 * (k + 1)),
        b_k: Ratio::new(k, 3 * (k + 1) * (k + 1) * (k + 2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Relative size below which the remaining tail terms cannot change a sum.
const TAIL_CUTOFF: f64 = 1e-20;

/// Exact mean and variance of `I_t` from the tail law
/// `P(I_t > j) = ((n - t - j)/(n - t + 1))^k`.
///
/// Uses `E(I_t) = sum_j P(I_t > j)` and `E(I_t^2) = sum_j (2j + 1) P(I_t > j)`.
/// Terms are added from the largest down and summation stops once the
/// remaining terms are provably below double-precision resolution.
pub fn exact_step_moments(n: usize, k: u32, t: usize) -> Result<Moments> {
    if t == 0 || t > n || k == 0 {
        return Err(KcmError::Config(format!(
            "need 1 <= t <= n and k >= 1 (got n={n}, k={k}, t={t})"
        )));
    }
    Ok(step_moments_for_deck((n - t + 1) as u64, k))
}

/// Moments of the per-step inversion count when `m` cards remain.
fn step_moments_for_deck(m: u64, k: u32) -> Moments {
    if m <= 1 {
        return Moments {
            mean: 0.0,
            variance: 0.0,
        };
    }
    let mut first = KahanSum::new();
    let mut second = KahanSum::new();
    // j = m - 1 - i, tail(j) = (i/m)^k, visited with i descending.
    for j in 0..m - 1 {
        let p = rank_tail(m, k, j + 1);
        first.add(p);
        second.add((2 * j + 1) as f64 * p);
        let left = (m - 2 - j) as f64;
        if p * left * (2 * m) as f64 <= TAIL_CUTOFF * first.value() {
            break;
        }
    }
    let mean = first.value();
    Moments {
        mean,
        variance: (second.value() - mean * mean).max(0.0),
    }
}

/// Exact `E(I)` and `Var(I)` for the whole permutation, using independence
/// of the per-step counts.
pub fn exact_total_moments(n: usize, k: u32) -> Result<Moments> {
    if n == 0 || k == 0 {
        return Err(KcmError::Config(format!("need n >= 1 and k >= 1 (got n={n}, k={k})")));
    }
    let per_step: Vec<Moments> = (2..=n as u64)
        .into_par_iter()
        .map(|m| step_moments_for_deck(m, k))
        .collect();
    let mut mean = KahanSum::new();
    let mut var = KahanSum::new();
    for s in &per_step {
        mean.add(s.mean);
        var.add(s.variance);
    }
    Ok(Moments {
        mean: mean.value(),
        variance: var.value(),
    })
}

/// `ceil(sqrt(n / k))`, computed in integers.
pub fn greedy_target_size(n: usize, k: u32) -> usize {
    let (n, k) = (n as u128, u128::from(k.max(1)));
    let mut s = ((n as f64 / k as f64).sqrt().ceil() as u128).max(1);
    while s > 1 && (s - 1) * (s - 1) * k >= n {
        s -= 1;
    }
    while s * s * k < n {
        s += 1;
    }
    s as usize
}

/// The greedy increasing subsequence built from target sets of the lowest
/// `target_size` remaining cards above the last pick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConstructionRecord {
    pub target_size: usize,
    /// Stopping times `T_1 < ... < T_M` (1-based).
    pub stops: Vec<u32>,
    /// `C_{T_1} < ... < C_{T_M}`.
    pub picked_cards: Vec<u32>,
    /// `A_m`: rank of the pick within its target set.
    pub target_ranks: Vec<u32>,
    /// `B_m`: cards above the previous pick removed strictly between stops.
    pub skipped_above: Vec<u32>,
    /// `|R_M^+|` when the construction stopped.
    pub final_pool: usize,
}

impl GreedyConstructionRecord {
    pub fn m(&self) -> usize {
        self.picked_cards.len()
    }
}

/// Replays the greedy lower-bound construction on a realized permutation.
///
/// Each round takes `S_m`, the lowest `target_size` cards among those still
/// in the deck and above the previous pick; `T_m` is the first later time a
/// card of `S_m` is removed. Stops once fewer than `target_size` cards
/// remain above the pick. When `target_size > n` the first round uses the
/// whole deck, so `M = 1`.
pub fn greedy_lower_bound(perm: &Permutation, k: u32) -> GreedyConstructionRecord {
    let n = perm.n();
    let target = greedy_target_size(n, k);
    let pos = perm.removal_times();
    let cards = perm.cards();

    let mut rec = GreedyConstructionRecord {
        target_size: target,
        stops: Vec::new(),
        picked_cards: Vec::new(),
        target_ranks: Vec::new(),
        skipped_above: Vec::new(),
        final_pool: 0,
    };

    let mut window: VecDeque<u32> = VecDeque::with_capacity(target.min(n));
    let mut scan = 1u32;
    let (mut t_prev, mut c_prev) = (0u32, 0u32);

    let fill = |window: &mut VecDeque<u32>, scan: &mut u32, t_prev: u32| {
        while window.len() < target && (*scan as usize) <= n {
            if pos[*scan as usize - 1] > t_prev {
                window.push_back(*scan);
            }
            *scan += 1;
        }
    };

    fill(&mut window, &mut scan, t_prev);
    loop {
        let (idx, &card) = window
            .iter()
            .enumerate()
            .min_by_key(|(_, &c)| pos[c as usize - 1])
            .expect("target set nonempty");
        let t_m = pos[card as usize - 1];
        let skipped = cards[t_prev as usize..(t_m - 1) as usize]
            .iter()
            .filter(|&&c| c > c_prev)
            .count();

        rec.stops.push(t_m);
        rec.picked_cards.push(card);
        rec.target_ranks.push(idx as u32 + 1);
        rec.skipped_above.push(skipped as u32);

        window.drain(..=idx);
        t_prev = t_m;
        c_prev = card;
        fill(&mut window, &mut scan, t_prev);
        if window.len() < target {
            rec.final_pool = window.len();
            break;
        }
    }
    rec
}

/// Copy of `rel` with the rank at 1-based time `t` replaced.
pub fn perturb_relative(rel: &RelativeSeq, t: usize, new_rank: u32) -> Result<RelativeSeq> {
    let n = rel.n();
    if t == 0 || t > n {
        return Err(KcmError::validation("perturbation time", Some(t), format!("outside 1..={n}")));
    }
    let bound = (n - t + 1) as u32;
    if new_rank == 0 || new_rank > bound {
        return Err(KcmError::validation(
            "perturbation rank",
            Some(t),
            format!("rank {new_rank} outside 1..={bound}"),
        ));
    }
    let mut ranks = rel.ranks().to_vec();
    ranks[t - 1] = new_rank;
    Ok(RelativeSeq::from_valid(ranks))
}
