//! The per-step law of the relative position under the minimum rule.
//!
//! With `m = n - t + 1` cards left and `k` uniform draws, the selected rank
//! `R` satisfies `P(R > j) = ((m - j) / m)^k` for `j = 0..=m`, and the
//! per-step inversion count is `R - 1`.

use crate::error::{KcmError, Result};

/// `P(R > j)` for a deck of `m` cards.
#[inline]
pub fn rank_tail(m: u64, k: u32, j: u64) -> f64 {
    if j >= m {
        return 0.0;
    }
    ((m - j) as f64 / m as f64).powi(k as i32)
}

/// `P(R = j)` for `1 <= j <= m`.
pub fn rank_pmf(m: u64, k: u32, j: u64) -> f64 {
    if j == 0 || j > m {
        return 0.0;
    }
    rank_tail(m, k, j - 1) - rank_tail(m, k, j)
}

/// Exact numerator of `P(R = j)` over the common denominator `m^k`:
/// the number of ordered draw tuples whose minimum is `j`.
pub fn rank_count(m: u64, k: u32, j: u64) -> Result<u128> {
    if j == 0 || j > m {
        return Ok(0);
    }
    let hi = checked_pow(u128::from(m - j + 1), k)?;
    let lo = checked_pow(u128::from(m - j), k)?;
    Ok(hi - lo)
}

pub fn checked_pow(base: u128, exp: u32) -> Result<u128> {
    base.checked_pow(exp)
        .ok_or_else(|| KcmError::Size(format!("{base}^{exp} overflows exact 128-bit arithmetic")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_values() {
        // m=5, k=2: P(R > 2) = (3/5)^2
        assert!((rank_tail(5, 2, 2) - 0.36).abs() < 1e-15);
        assert_eq!(rank_tail(5, 2, 0), 1.0);
        assert_eq!(rank_tail(5, 2, 5), 0.0);
        assert_eq!(rank_tail(1, 7, 0), 1.0);
    }

    #[test]
    fn counts_sum_to_m_pow_k() {
        for m in 1..8u64 {
            for k in 1..5u32 {
                let total: u128 = (1..=m).map(|j| rank_count(m, k, j).unwrap()).sum();
                assert_eq!(total, u128::from(m).pow(k));
                let s: f64 = (1..=m).map(|j| rank_pmf(m, k, j)).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn k_one_is_uniform() {
        for j in 1..=6 {
            assert!((rank_pmf(6, 1, j) - 1.0 / 6.0).abs() < 1e-15);
        }
    }
}
