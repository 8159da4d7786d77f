//! Permutations as card-removal orders, relative-position sequences, and
//! the bijection between them.
//!
//! Everything public is 1-based: `cards()[t - 1]` is the card removed at
//! time `t`, and `ranks()[t - 1]` is its rank within the deck remaining at
//! time `t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::order_stat::RankSelect;

/// A removal order `(C_1, ..., C_n)`, a bijection on `{1, ..., n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation {
    cards: Vec<u32>,
}

impl Permutation {
    pub fn new(cards: Vec<u32>) -> Result<Self> {
        let n = cards.len();
        if n == 0 {
            return Err(KcmError::validation("permutation", None, "empty (n must be >= 1)"));
        }
        let mut seen = vec![false; n + 1];
        for (i, &c) in cards.iter().enumerate() {
            let c = c as usize;
            if c == 0 || c > n {
                return Err(KcmError::validation(
                    "permutation",
                    Some(i + 1),
                    format!("card {c} outside 1..={n}"),
                ));
            }
            if seen[c] {
                return Err(KcmError::validation(
                    "permutation",
                    Some(i + 1),
                    format!("duplicate card {c}"),
                ));
            }
            seen[c] = true;
        }
        Ok(Self { cards })
    }

    /// Caller guarantees the bijection invariant.
    pub(crate) fn from_valid(cards: Vec<u32>) -> Self {
        debug_assert!(Permutation::new(cards.clone()).is_ok());
        Self { cards }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_valid((1..=n as u32).collect())
    }

    pub fn reversal(n: usize) -> Self {
        Self::from_valid((1..=n as u32).rev().collect())
    }

    pub fn n(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[u32] {
        &self.cards
    }

    /// Card removed at 1-based time `t`.
    pub fn card_at(&self, t: usize) -> u32 {
        self.cards[t - 1]
    }

    /// `removal_time()[c - 1]` is the 1-based time at which card `c` was removed.
    pub fn removal_times(&self) -> Vec<u32> {
        let mut pos = vec![0u32; self.n()];
        for (i, &c) in self.cards.iter().enumerate() {
            pos[c as usize - 1] = i as u32 + 1;
        }
        pos
    }

    pub fn into_cards(self) -> Vec<u32> {
        self.cards
    }

    pub fn to_text(&self) -> String {
        join_u32(&self.cards)
    }
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = KcmError;
    fn try_from(cards: Vec<u32>) -> Result<Self> {
        Permutation::new(cards)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Self {
        p.cards
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Permutation {
    type Err = KcmError;
    fn from_str(s: &str) -> Result<Self> {
        Permutation::new(parse_u32_line(s)?)
    }
}

/// Relative positions `(C~_1, ..., C~_n)` with `1 <= C~_t <= n - t + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct RelativeSeq {
    ranks: Vec<u32>,
}

impl RelativeSeq {
    pub fn new(ranks: Vec<u32>) -> Result<Self> {
        let n = ranks.len();
        if n == 0 {
            return Err(KcmError::validation("relative sequence", None, "empty (n must be >= 1)"));
        }
        for (i, &r) in ranks.iter().enumerate() {
            let bound = n - i;
            if r == 0 || r as usize > bound {
                return Err(KcmError::validation(
                    "relative sequence",
                    Some(i + 1),
                    format!("rank {r} outside 1..={bound}"),
                ));
            }
        }
        Ok(Self { ranks })
    }

    pub(crate) fn from_valid(ranks: Vec<u32>) -> Self {
        debug_assert!(RelativeSeq::new(ranks.clone()).is_ok());
        Self { ranks }
    }

    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// Rank at 1-based time `t`.
    pub fn rank_at(&self, t: usize) -> u32 {
        self.ranks[t - 1]
    }

    /// Sum of `C~_t - 1`, which is the inversion count of the induced permutation.
    pub fn inversion_total(&self) -> u64 {
        self.ranks.iter().map(|&r| u64::from(r - 1)).sum()
    }

    pub fn into_ranks(self) -> Vec<u32> {
        self.ranks
    }

    pub fn to_text(&self) -> String {
        join_u32(&self.ranks)
    }
}

impl TryFrom<Vec<u32>> for RelativeSeq {
    type Error = KcmError;
    fn try_from(ranks: Vec<u32>) -> Result<Self> {
        RelativeSeq::new(ranks)
    }
}

impl From<RelativeSeq> for Vec<u32> {
    fn from(r: RelativeSeq) -> Self {
        r.ranks
    }
}

impl fmt::Display for RelativeSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for RelativeSeq {
    type Err = KcmError;
    fn from_str(s: &str) -> Result<Self> {
        RelativeSeq::new(parse_u32_line(s)?)
    }
}

/// The deck `D_t` remaining at time `t`.
#[derive(Debug, Clone)]
pub struct DeckState {
    remaining: RankSelect,
    t: usize,
}

impl DeckState {
    pub fn new(n: usize) -> Self {
        Self {
            remaining: RankSelect::full(n),
            t: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.remaining.capacity()
    }

    /// Current 1-based time.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.remaining.len()
    }

    pub fn is_empty(&self) -> bool {
        self.remaining.is_empty()
    }

    pub fn contains(&self, card: u32) -> bool {
        self.remaining.contains(card as usize)
    }

    /// The `rank`-th lowest remaining card.
    pub fn card_of_rank(&self, rank: u32) -> Option<u32> {
        self.remaining.select(rank as usize).map(|c| c as u32)
    }

    /// Rank of a remaining card among the remaining cards.
    pub fn rank_of_card(&self, card: u32) -> Option<u32> {
        self.contains(card).then(|| self.remaining.rank(card as usize) as u32)
    }

    /// Removes the `rank`-th lowest card and advances time.
    pub fn remove_rank(&mut self, rank: u32) -> Option<u32> {
        let c = self.remaining.select_remove(rank as usize)? as u32;
        self.t += 1;
        Some(c)
    }

    /// Removes `card` and advances time; returns its rank before removal.
    pub fn remove_card(&mut self, card: u32) -> Option<u32> {
        let rank = self.rank_of_card(card)?;
        self.remaining.remove(card as usize);
        self.t += 1;
        Some(rank)
    }

    pub fn remaining(&self) -> impl Iterator<Item = u32> + '_ {
        self.remaining.iter().map(|c| c as u32)
    }
}

/// `C_t` is the `rel[t]`-th lowest card of the deck left after `C_1..C_{t-1}`.
pub fn relative_to_permutation(rel: &RelativeSeq) -> Permutation {
    let mut deck = DeckState::new(rel.n());
    let cards = rel
        .ranks()
        .iter()
        .map(|&r| deck.remove_rank(r).expect("rank within deck by RelativeSeq invariant"))
        .collect();
    Permutation::from_valid(cards)
}

pub fn permutation_to_relative(perm: &Permutation) -> RelativeSeq {
    let mut deck = DeckState::new(perm.n());
    let ranks = perm
        .cards()
        .iter()
        .map(|&c| deck.remove_card(c).expect("card present by Permutation invariant"))
        .collect();
    RelativeSeq::from_valid(ranks)
}

fn join_u32(xs: &[u32]) -> String {
    let mut s = String::with_capacity(xs.len() * 4);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&x.to_string());
    }
    s
}

/// Parses a line of whitespace-separated integers, or a JSON array.
pub fn parse_u32_line(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    if s.starts_with('[') {
        return serde_json::from_str(s).map_err(|e| KcmError::Parse {
            line: None,
            reason: e.to_string(),
        });
    }
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<u32>().map_err(|e| KcmError::Parse {
                line: None,
                reason: format!("`{tok}`: {e}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(v: &[u32]) -> RelativeSeq {
        RelativeSeq::new(v.to_vec()).unwrap()
    }

    fn perm(v: &[u32]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn all_ones_is_identity() {
        assert_eq!(relative_to_permutation(&rel(&[1, 1, 1, 1])), perm(&[1, 2, 3, 4]));
    }

    #[test]
    fn descending_ranks_is_reversal() {
        assert_eq!(relative_to_permutation(&rel(&[4, 3, 2, 1])), perm(&[4, 3, 2, 1]));
        let n = 50;
        let r = RelativeSeq::new((1..=n as u32).rev().collect()).unwrap();
        assert_eq!(relative_to_permutation(&r), Permutation::reversal(n));
    }

    #[test]
    fn hand_traced_example() {
        // {1,2,3,4} take 2nd -> 2; {1,3,4} take 1st -> 1; {3,4} take 2nd -> 4; {3} -> 3
        assert_eq!(relative_to_permutation(&rel(&[2, 1, 2, 1])), perm(&[2, 1, 4, 3]));
        assert_eq!(permutation_to_relative(&perm(&[2, 1, 4, 3])), rel(&[2, 1, 2, 1]));
        assert_eq!(permutation_to_relative(&perm(&[1, 2, 3, 4])), rel(&[1, 1, 1, 1]));
    }

    #[test]
    fn relative_validation_names_index() {
        let err = RelativeSeq::new(vec![1, 4, 1, 1]).unwrap_err();
        match err {
            KcmError::Validation { index, .. } => assert_eq!(index, Some(2)),
            e => panic!("unexpected {e}"),
        }
        // last coordinate must be 1
        assert!(RelativeSeq::new(vec![1, 1, 2]).is_err());
        assert!(RelativeSeq::new(vec![0]).is_err());
        assert!(RelativeSeq::new(vec![]).is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(matches!(
            Permutation::new(vec![1, 1, 3]),
            Err(KcmError::Validation { index: Some(2), .. })
        ));
        assert!(matches!(
            Permutation::new(vec![1, 4, 2]),
            Err(KcmError::Validation { index: Some(2), .. })
        ));
        assert!(Permutation::new(vec![]).is_err());
    }

    #[test]
    fn text_and_json_forms() {
        let p: Permutation = "2 1 4 3\n".parse().unwrap();
        assert_eq!(p.to_string(), "2 1 4 3");
        assert_eq!(serde_json::to_string(&p).unwrap(), "[2,1,4,3]");
        let q: Permutation = serde_json::from_str("[2,1,4,3]").unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Permutation>("[2,2,4,3]").is_err());
        assert!(serde_json::from_str::<RelativeSeq>("[1,2]").is_err());
        let r: RelativeSeq = "[2,1,2,1]".parse().unwrap();
        assert_eq!(r, rel(&[2, 1, 2, 1]));
        assert!("1 x 3".parse::<Permutation>().is_err());
    }

    #[test]
    fn deck_state_tracks_time() {
        let mut d = DeckState::new(4);
        assert_eq!(d.t(), 1);
        assert_eq!(d.remove_rank(2), Some(2));
        assert_eq!(d.rank_of_card(3), Some(2));
        assert_eq!(d.remove_card(4), Some(3));
        assert_eq!(d.t(), 3);
        assert_eq!(d.remaining().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(d.len(), 4 - d.t() + 1);
    }

    fn arb_rel() -> impl Strategy<Value = RelativeSeq> {
        (1usize..300).prop_flat_map(|n| {
            (0..n)
                .map(|i| (1u32..=(n - i) as u32).boxed())
                .collect::<Vec<_>>()
                .prop_map(RelativeSeq::from_valid)
        })
    }

    fn arb_perm() -> impl Strategy<Value = Permutation> {
        (1usize..300).prop_flat_map(|n| {
            Just((1..=n as u32).collect::<Vec<_>>())
                .prop_shuffle()
                .prop_map(Permutation::from_valid)
        })
    }

    proptest! {
        #[test]
        fn round_trip_from_relative(r in arb_rel()) {
            let p = relative_to_permutation(&r);
            prop_assert_eq!(permutation_to_relative(&p), r);
        }

        #[test]
        fn round_trip_from_permutation(p in arb_perm()) {
            let r = permutation_to_relative(&p);
            prop_assert_eq!(relative_to_permutation(&r), p);
        }

        #[test]
        fn suffix_is_remaining_deck(r in arb_rel()) {
            let p = relative_to_permutation(&r);
            let mut deck = DeckState::new(p.n());
            for t in 1..=p.n() {
                let mut suffix: Vec<u32> = p.cards()[t - 1..].to_vec();
                suffix.sort_unstable();
                let remaining: Vec<u32> = deck.remaining().collect();
                prop_assert_eq!(suffix, remaining);
                deck.remove_card(p.card_at(t));
            }
        }
    }
}
