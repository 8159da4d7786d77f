//! Choice strategies and coupled replay.
//!
//! A strategy sees the removal history and the `k` offered cards (as card
//! values, repeats allowed) and returns one of the offered cards. Strategies
//! are registered by name in a [`StrategyRegistry`] and looked up at run
//! time from CLI flags or experiment configs.
//!
//! Coupling: a [`DrawTrace`] stores draw *ranks*. Replaying one trace under
//! two strategies resolves each rank against that strategy's own remaining
//! deck, so both runs see draws in the same relative positions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{KcmError, Result};
use crate::model::{DeckState, Permutation};
use crate::sampler::DrawTrace;

/// What a strategy may look at when choosing the card removed at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct StrategyContext<'a> {
    pub n: usize,
    pub k: u32,
    /// Cards removed at times `1..t`.
    pub history: &'a [u32],
    /// The offered cards `(c_{t,1}, ..., c_{t,k})`.
    pub draws: &'a [u32],
}

impl StrategyContext<'_> {
    /// 1-based current time.
    pub fn t(&self) -> usize {
        self.history.len() + 1
    }
}

pub trait ChoiceStrategy: Send + Sync {
    fn name(&self) -> &str;

    /// Rejects `(n, k)` combinations the strategy is not defined for.
    fn check_params(&self, _n: usize, _k: u32) -> Result<()> {
        Ok(())
    }

    /// Must return an element of `ctx.draws`.
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32>;
}

impl fmt::Debug for dyn ChoiceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChoiceStrategy({})", self.name())
    }
}

pub fn strategy_min(ctx: &StrategyContext<'_>) -> u32 {
    *ctx.draws.iter().min().expect("k >= 1 draws")
}

pub fn strategy_max(ctx: &StrategyContext<'_>) -> u32 {
    *ctx.draws.iter().max().expect("k >= 1 draws")
}

pub fn strategy_uniform(ctx: &StrategyContext<'_>) -> u32 {
    ctx.draws[0]
}

/// Follows the minimum rule except in one configuration: at `t = n - 2`
/// with history exactly `(2, 3, ..., n - 2)` and offered values exactly
/// `{1, n - 1}`, it takes `n - 1`. Card 1 is then still available at a
/// later step, which can only lengthen the increasing run `2, ..., n - 1`.
pub fn strategy_copy(ctx: &StrategyContext<'_>) -> Result<u32> {
    check_copy_params(ctx.n, ctx.k)?;
    if copy_triggers(ctx) {
        Ok(ctx.n as u32 - 1)
    } else {
        Ok(strategy_min(ctx))
    }
}

fn check_copy_params(n: usize, k: u32) -> Result<()> {
    if n < 4 || k < 2 {
        return Err(KcmError::Config(format!(
            "strategy `copy` requires n >= 4 and k >= 2 (got n={n}, k={k})"
        )));
    }
    Ok(())
}

fn copy_triggers(ctx: &StrategyContext<'_>) -> bool {
    let n = ctx.n as u32;
    if ctx.history.len() + 3 != ctx.n {
        return false;
    }
    if !ctx.history.iter().copied().eq(2..=n - 2) {
        return false;
    }
    let has_one = ctx.draws.contains(&1);
    let has_top = ctx.draws.contains(&(n - 1));
    has_one && has_top && ctx.draws.iter().all(|&c| c == 1 || c == n - 1)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinStrategy;

#[derive(Debug, Clone, Copy, Default)]
pub struct CopyStrategy;

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformStrategy;

#[derive(Debug, Clone, Copy, Default)]
pub struct MaxStrategy;

impl ChoiceStrategy for MinStrategy {
    fn name(&self) -> &str {
        "min"
    }
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32> {
        Ok(strategy_min(ctx))
    }
}

impl ChoiceStrategy for CopyStrategy {
    fn name(&self) -> &str {
        "copy"
    }
    fn check_params(&self, n: usize, k: u32) -> Result<()> {
        check_copy_params(n, k)
    }
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32> {
        strategy_copy(ctx)
    }
}

impl ChoiceStrategy for UniformStrategy {
    fn name(&self) -> &str {
        "uniform"
    }
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32> {
        Ok(strategy_uniform(ctx))
    }
}

impl ChoiceStrategy for MaxStrategy {
    fn name(&self) -> &str {
        "max"
    }
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32> {
        Ok(strategy_max(ctx))
    }
}

/// Wraps a closure as a named strategy.
pub struct FnStrategy<F> {
    name: String,
    f: F,
}

impl<F> FnStrategy<F>
where
    F: Fn(&StrategyContext<'_>) -> u32 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> ChoiceStrategy for FnStrategy<F>
where
    F: Fn(&StrategyContext<'_>) -> u32 + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn choose(&self, ctx: &StrategyContext<'_>) -> Result<u32> {
        Ok((self.f)(ctx))
    }
}

pub type SharedStrategy = Arc<dyn ChoiceStrategy>;

/// Name -> strategy lookup.
#[derive(Clone)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, SharedStrategy>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// `min`, `copy`, `uniform` and `max`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(MinStrategy));
        reg.register(Arc::new(CopyStrategy));
        reg.register(Arc::new(UniformStrategy));
        reg.register(Arc::new(MaxStrategy));
        reg
    }

    /// Registers under `strategy.name()`, replacing any previous entry.
    pub fn register(&mut self, strategy: SharedStrategy) -> Option<SharedStrategy> {
        self.entries.insert(strategy.name().to_string(), strategy)
    }

    pub fn get(&self, name: &str) -> Result<SharedStrategy> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| KcmError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

pub fn builtin(name: &str) -> Result<SharedStrategy> {
    StrategyRegistry::with_builtins().get(name)
}

/// Runs the removal process under `strategy`, with `fill_ranks(m, buf)`
/// supplying the `k` draw ranks (each in `1..=m`) at every step.
pub fn play<F>(strategy: &dyn ChoiceStrategy, n: usize, k: u32, mut fill_ranks: F) -> Result<Permutation>
where
    F: FnMut(usize, u32, &mut [u32]),
{
    strategy.check_params(n, k)?;
    let mut deck = DeckState::new(n);
    let mut history: Vec<u32> = Vec::with_capacity(n);
    let mut ranks = vec![0u32; k as usize];
    let mut draws = vec![0u32; k as usize];
    for t in 1..=n {
        let m = (n - t + 1) as u32;
        fill_ranks(t, m, &mut ranks);
        for (d, &r) in draws.iter_mut().zip(&ranks) {
            *d = deck.card_of_rank(r).ok_or_else(|| {
                KcmError::validation("draw rank", Some(t), format!("rank {r} outside 1..={m}"))
            })?;
        }
        let ctx = StrategyContext {
            n,
            k,
            history: &history,
            draws: &draws,
        };
        let chosen = strategy.choose(&ctx)?;
        if !draws.contains(&chosen) {
            return Err(KcmError::Contract {
                strategy: strategy.name().to_string(),
                t,
                reason: format!("returned card {chosen}, offered {draws:?}"),
            });
        }
        deck.remove_card(chosen);
        history.push(chosen);
    }
    Ok(Permutation::from_valid(history))
}

/// Replays the trace's draw ranks under `strategy`.
pub fn replay(strategy: &dyn ChoiceStrategy, trace: &DrawTrace) -> Result<Permutation> {
    play(strategy, trace.n(), trace.k(), |t, _, buf| buf.copy_from_slice(trace.step(t)))
}

/// Replays one trace under both strategies.
pub fn coupled_run(
    a: &dyn ChoiceStrategy,
    b: &dyn ChoiceStrategy,
    trace: &DrawTrace,
) -> Result<(Permutation, Permutation)> {
    Ok((replay(a, trace)?, replay(b, trace)?))
}

/// Samples one permutation under `strategy` with fresh uniform draws.
pub fn sample_with_strategy<R: Rng + ?Sized>(
    strategy: &dyn ChoiceStrategy,
    n: usize,
    k: u32,
    rng: &mut R,
) -> Result<Permutation> {
    play(strategy, n, k, |_, m, buf| {
        for r in buf.iter_mut() {
            *r = rng.random_range(1..=m);
        }
    })
}
