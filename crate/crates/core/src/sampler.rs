//! Generation of k-card-minimum permutations.
//!
//! Two modes produce the same law. `DirectDraws` literally draws `k`
//! uniform ranks from the remaining deck and keeps the smallest.
//! `InverseCdf` samples the selected rank from its closed-form tail by
//! inverse transform, which costs O(1) per step regardless of `k`.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::law::rank_tail;
use crate::model::{relative_to_permutation, Permutation, RelativeSeq};
use crate::rng::{stream_rng, KcmRng};

/// Above this many draws per step the inverse transform is the default.
pub const DIRECT_DRAWS_MAX_K: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    DirectDraws,
    InverseCdf,
}

impl SamplerMode {
    pub fn default_for(k: u32) -> Self {
        if k > DIRECT_DRAWS_MAX_K {
            SamplerMode::InverseCdf
        } else {
            SamplerMode::DirectDraws
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::DirectDraws => "direct",
            SamplerMode::InverseCdf => "inverse",
        })
    }
}

impl FromStr for SamplerMode {
    type Err = KcmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" | "direct-draws" => Ok(SamplerMode::DirectDraws),
            "inverse" | "inverse-cdf" => Ok(SamplerMode::InverseCdf),
            other => Err(KcmError::Config(format!(
                "unknown sampler mode `{other}` (expected direct|inverse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n: usize,
    pub k: u32,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl SamplerConfig {
    /// Validated config using the default mode for `k`.
    pub fn new(n: usize, k: u32, seed: u64) -> Result<Self> {
        Self::with_mode(n, k, SamplerMode::default_for(k), seed)
    }

    pub fn with_mode(n: usize, k: u32, mode: SamplerMode, seed: u64) -> Result<Self> {
        let cfg = Self { n, k, mode, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(KcmError::Config("deck size n must be >= 1".into()));
        }
        if self.n > u32::MAX as usize {
            return Err(KcmError::Config(format!("deck size {} exceeds u32 cards", self.n)));
        }
        if self.k == 0 {
            return Err(KcmError::Config("choices per step k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn sampler(&self) -> KcmSampler {
        KcmSampler {
            n: self.n,
            k: self.k,
            mode: self.mode,
        }
    }

    /// The generator used by the seed-level entry points.
    pub fn rng(&self) -> KcmRng {
        stream_rng(self.seed, 0)
    }
}

/// A sampler for fixed `(n, k, mode)` that draws from a caller-supplied RNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KcmSampler {
    pub n: usize,
    pub k: u32,
    pub mode: SamplerMode,
}

impl KcmSampler {
    /// Selected rank out of `m` remaining cards.
    #[inline]
    pub fn step_rank<R: Rng + ?Sized>(&self, rng: &mut R, m: u32) -> u32 {
        match self.mode {
            SamplerMode::DirectDraws => {
                let mut best = u32::MAX;
                for _ in 0..self.k {
                    best = best.min(draw_rank(rng, m));
                }
                best
            }
            SamplerMode::InverseCdf => {
                let u: f64 = rng.sample(Open01);
                inverse_cdf_rank(u, m, self.k)
            }
        }
    }

    pub fn relative<R: Rng + ?Sized>(&self, rng: &mut R) -> RelativeSeq {
        let n = self.n as u32;
        let ranks = (0..n).map(|i| self.step_rank(rng, n - i)).collect();
        RelativeSeq::from_valid(ranks)
    }

    pub fn permutation<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        relative_to_permutation(&self.relative(rng))
    }

    /// Inversion count only, without materializing anything.
    pub fn inversions<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let n = self.n as u32;
        (0..n).map(|i| u64::from(self.step_rank(rng, n - i) - 1)).sum()
    }

    /// Raw per-step draw ranks, independent of any strategy.
    pub fn trace<R: Rng + ?Sized>(&self, rng: &mut R) -> DrawTrace {
        let n = self.n as u32;
        let k = self.k as usize;
        let mut draws = Vec::with_capacity(self.n * k);
        for i in 0..n {
            let m = n - i;
            for _ in 0..k {
                draws.push(draw_rank(rng, m));
            }
        }
        DrawTrace {
            n: self.n,
            k: self.k,
            draws,
        }
    }
}

/// Uniform rank in `1..=m`. Shared by direct draws and traces so that the
/// two consume randomness identically.
#[inline]
fn draw_rank<R: Rng + ?Sized>(rng: &mut R, m: u32) -> u32 {
    rng.random_range(1..=m)
}

/// Smallest `j` in `1..=m` with `((m - j) / m)^k < u`, for `u` in `(0, 1)`.
pub fn inverse_cdf_rank(u: f64, m: u32, k: u32) -> u32 {
    let tail = |j: u32| rank_tail(u64::from(m), k, u64::from(j));
    let accepts = |j: u32| tail(j) < u && (j == 1 || tail(j - 1) >= u);

    let guess = f64::from(m) - (f64::from(m) * u.powf(1.0 / f64::from(k))).floor();
    let j = guess.clamp(1.0, f64::from(m)) as u32;
    if accepts(j) {
        return j;
    }
    // tail(m) = 0 < u, so the answer exists; tail is nonincreasing in j.
    let (mut lo, mut hi) = (1u32, m);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail(mid) < u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

pub fn sample_kcm(cfg: &SamplerConfig) -> Permutation {
    cfg.sampler().permutation(&mut cfg.rng())
}

pub fn sample_relative(cfg: &SamplerConfig) -> RelativeSeq {
    cfg.sampler().relative(&mut cfg.rng())
}

pub fn sample_trace(cfg: &SamplerConfig) -> DrawTrace {
    cfg.sampler().trace(&mut cfg.rng())
}

/// Per-step relative draw ranks: row `t` holds `k` ranks in `1..=n-t+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TraceRepr", into = "TraceRepr")]
pub struct DrawTrace {
    n: usize,
    k: u32,
    draws: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct TraceRepr {
    n: usize,
    k: u32,
    draws: Vec<Vec<u32>>,
}

impl DrawTrace {
    pub fn new(n: usize, k: u32, rows: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(KcmError::validation("draw trace", None, "n and k must be >= 1"));
        }
        if rows.len() != n {
            return Err(KcmError::validation(
                "draw trace",
                None,
                format!("expected {n} steps, got {}", rows.len()),
            ));
        }
        let mut draws = Vec::with_capacity(n * k as usize);
        for (i, row) in rows.into_iter().enumerate() {
            let m = (n - i) as u32;
            if row.len() != k as usize {
                return Err(KcmError::validation(
                    "draw trace",
                    Some(i + 1),
                    format!("expected {k} draws, got {}", row.len()),
                ));
            }
            if let Some(&bad) = row.iter().find(|&&r| r == 0 || r > m) {
                return Err(KcmError::validation(
                    "draw trace",
                    Some(i + 1),
                    format!("rank {bad} outside 1..={m}"),
                ));
            }
            draws.extend(row);
        }
        Ok(Self { n, k, draws })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The `k` draw ranks at 1-based time `t`.
    pub fn step(&self, t: usize) -> &[u32] {
        let k = self.k as usize;
        &self.draws[(t - 1) * k..t * k]
    }

    pub fn steps(&self) -> impl Iterator<Item = &[u32]> {
        self.draws.chunks_exact(self.k as usize)
    }

    /// Little-endian `n`, `k`, then the draws row by row, all as `u32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.draws.len());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        for d in &self.draws {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| KcmError::Parse {
            line: None,
            reason: format!("binary trace: {reason}"),
        };
        if bytes.len() < 8 || !bytes.len().is_multiple_of(4) {
            return Err(bad("truncated"));
        }
        let words: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let (n, k) = (words[0] as usize, words[1]);
        if k == 0 || words.len() - 2 != n * k as usize {
            return Err(bad("length does not match header"));
        }
        let rows = words[2..].chunks_exact(k as usize).map(<[u32]>::to_vec).collect();
        DrawTrace::new(n, k, rows)
    }
}

impl TryFrom<TraceRepr> for DrawTrace {
    type Error = KcmError;
    fn try_from(r: TraceRepr) -> Result<Self> {
        DrawTrace::new(r.n, r.k, r.draws)
    }
}

impl From<DrawTrace> for TraceRepr {
    fn from(t: DrawTrace) -> Self {
        let draws = t.steps().map(<[u32]>::to_vec).collect();
        TraceRepr {
            n: t.n,
            k: t.k,
            draws,
        }
    }
}
