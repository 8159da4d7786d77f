//! k-card-minimum random permutations.
//!
//! A deck `1..=n` is emptied one card at a time; at each step `k` cards are
//! drawn uniformly (with replacement) from what is left and a choice
//! strategy keeps one of them. Under the minimum rule the relative
//! positions of the removed cards are independent, which gives exact laws
//! for the inversion count; the longest increasing subsequence is studied
//! by simulation, exhaustive enumeration, and a greedy lower bound.
//!
//! Modules:
//! * [`model`]: permutations, relative-position sequences, the bijection.
//! * [`sampler`]: seeded generation in direct-draw or inverse-CDF mode.
//! * [`strategies`]: the choice-strategy trait, registry, coupled replay.
//! * [`stats`]: inversions, LIS, exact moments, greedy construction.
//! * [`oracle`]: convolution laws and exhaustive enumeration.
//! * [`experiments`]: Monte Carlo harness and statistical verdicts.
//! * [`verify`]: named verification suites used by the CLI and tests.

pub mod error;
pub mod experiments;
pub mod law;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod order_stat;
pub mod rng;
pub mod sampler;
pub mod stat_tests;
pub mod stats;
pub mod strategies;
pub mod verify;

pub use error::{KcmError, Result};
pub use model::{permutation_to_relative, relative_to_permutation, DeckState, Permutation, RelativeSeq};
pub use oracle::{enumerate_strategy, exact_e_l, exact_pmf_i, EnumerationResult, ExactPmf};
pub use sampler::{sample_kcm, sample_relative, sample_trace, DrawTrace, KcmSampler, SamplerConfig, SamplerMode};
pub use stats::{
    asymptotic_constants, count_inversions, exact_step_moments, exact_total_moments, greedy_lower_bound,
    inversion_profile, lis_length, perturb_relative, AsymptoticConstants, GreedyConstructionRecord, Moments,
};
pub use strategies::{coupled_run, ChoiceStrategy, StrategyContext, StrategyRegistry};
