//! Goodness-of-fit helpers: Pearson chi-square and the one-sample
//! Kolmogorov-Smirnov distance to the standard normal.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{KcmError, Result};

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `sup_x |F_n(x) - Phi(x)|` for the given sample. Sorts a copy.
pub fn ks_distance_normal(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(KcmError::Statistic("KS distance of an empty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(KcmError::Statistic("KS distance of a sample containing NaN".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = standard_normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Pearson statistic of observed `counts` against cell probabilities.
///
/// Adjacent cells are pooled left to right until each pooled cell has
/// expected count at least `min_expected`; a short final remainder joins
/// the last pooled cell. Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square_statistic(counts: &[u64], probs: &[f64], min_expected: f64) -> (f64, usize) {
    assert_eq!(counts.len(), probs.len(), "counts/probs length mismatch");
    let total: u64 = counts.iter().sum();
    let total = total as f64;

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * total;
        if exp >= min_expected {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => pooled.push((obs, exp)),
        }
    }
    let stat = pooled
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    (stat, pooled.len().saturating_sub(1))
}

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    if df == 0 {
        return 0.0;
    }
    ChiSquared::new(df as f64)
        .expect("df > 0")
        .inverse_cdf(1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn box_muller<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn ks_self_test_on_normal_samples() {
        let mut rng = stream_rng(2024, 0);
        let xs: Vec<f64> = (0..5000).map(|_| box_muller(&mut rng)).collect();
        let d = ks_distance_normal(&xs).unwrap();
        assert!(d < 0.02, "KS={d}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = stream_rng(7, 0);
        let xs: Vec<f64> = (0..5000).map(|_| box_muller(&mut rng) + 0.5).collect();
        assert!(ks_distance_normal(&xs).unwrap() > 0.1);
    }

    #[test]
    fn ks_single_point() {
        // F_1 jumps 0 -> 1 at 0 where Phi = 1/2
        assert!((ks_distance_normal(&[0.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(ks_distance_normal(&[]).is_err());
    }

    #[test]
    fn chi_square_pools_small_cells() {
        let (stat, df) = chi_square_statistic(&[50, 50], &[0.5, 0.5], 5.0);
        assert_eq!((stat, df), (0.0, 1));
        let (_, df) = chi_square_statistic(&[10, 1, 1, 88], &[0.1, 0.01, 0.01, 0.88], 5.0);
        assert_eq!(df, 1);
    }

    #[test]
    fn critical_values() {
        // chi2_{0.95}(1) = 3.841, chi2_{0.999}(23) = 49.728
        assert!((chi_square_critical(1, 0.05) - 3.841_458_8).abs() < 1e-5);
        assert!((chi_square_critical(23, 1e-3) - 49.728).abs() < 1e-2);
    }

    #[test]
    fn chi_square_accepts_fair_die() {
        let mut rng = stream_rng(1, 1);
        let mut counts = vec![0u64; 6];
        for _ in 0..60_000 {
            counts[rng.random_range(0..6)] += 1;
        }
        let (stat, df) = chi_square_statistic(&counts, &[1.0 / 6.0; 6], 5.0);
        assert!(stat < chi_square_critical(df, 1e-3));
    }
}
