//! Descriptive statistics and nonparametric tests.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::error::{Error, Result};
use crate::math::normal_sf;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n − 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sqrt(sample_variance(xs))
}

/// Linear-interpolation quantile of already sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted_copy(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Mid-ranks (1-based) of `xs`; ties share the average of their ranks.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of tie groups in `xs`.
fn tie_sizes(xs: &[f64]) -> Vec<usize> {
    let sorted = sorted_copy(xs);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            out.push(j - i);
        }
        i = j;
    }
    out
}

/// Largest sample size for which the signed-rank null is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied absolute differences share
/// mid-ranks. With at most [`WILCOXON_EXACT_MAX_N`] nonzero differences the
/// p-value comes from the exact permutation distribution of the positive
/// rank sum; above that a normal approximation with tie and continuity
/// corrections is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData(alloc::format!(
            "Wilcoxon signed-rank test needs at least 5 nonzero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| fabs(*d)).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    if n <= WILCOXON_EXACT_MAX_N {
        return Ok(signed_rank_exact_p(&ranks, w_plus));
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&abs)
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let dev = w_plus - mu;
    let corrected = if dev > 0.0 {
        dev - 0.5
    } else if dev < 0.0 {
        dev + 0.5
    } else {
        0.0
    };
    let z = corrected / sqrt(var);
    Ok((2.0 * normal_sf(fabs(z))).min(1.0))
}

/// Exact two-sided p-value `2·min(P(W⁺ ≤ w), P(W⁺ ≥ w))` by dynamic
/// programming over doubled (integer) mid-ranks.
fn signed_rank_exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0_f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all: f64 = counts.iter().sum();
    let w = libm::round(2.0 * w_plus) as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Vargha–Delaney Â₁₂: probability that a draw from `x` exceeds one from
/// `y`, counting ties as one half.
pub fn a12(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("A12 needs two nonempty samples"));
    }
    let ys = sorted_copy(y);
    let mut score = 0.0;
    for xi in x {
        let below = ys.partition_point(|v| v < xi);
        let not_above = ys.partition_point(|v| v <= xi);
        score += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(score / (x.len() as f64 * y.len() as f64))
}

/// Two-sided Wilcoxon rank-sum (Mann–Whitney U) test for two independent
/// samples; normal approximation with tie and continuity corrections.
pub fn rank_sum_test(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("rank-sum test needs two nonempty samples"));
    }
    let n1 = x.len() as f64;
    let n2 = y.len() as f64;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let n = n1 + n2;
    let tie_term: f64 = tie_sizes(&pooled)
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let dev = fabs(u - mu);
    let z = (dev - 0.5).max(0.0) / sqrt(var);
    Ok((2.0 * normal_sf(z)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn wilcoxon_all_positive_six() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0; 6];
        let p = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!((p - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_identical_is_insufficient() {
        let x = [0.3; 8];
        assert!(matches!(
            wilcoxon_signed_rank(&x, &x),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn wilcoxon_length_mismatch() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0; 6], &[1.0; 5]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn a12_examples() {
        assert_eq!(a12(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.375);
        assert_eq!(a12(&[0.4; 3], &[0.4; 5]).unwrap(), 0.5);
        assert_eq!(a12(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(a12(&[], &[1.0]).is_err());
    }

    #[test]
    fn rank_sum_detects_shift() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 + 25.0).collect();
        assert!(rank_sum_test(&x, &y).unwrap() < 1e-6);
        assert!(rank_sum_test(&x, &x).unwrap() > 0.9);
    }
}
