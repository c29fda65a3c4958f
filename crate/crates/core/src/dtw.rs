//! Dynamic time warping with absolute-difference local cost.

use alloc::vec;

use libm::fabs;

use crate::error::{Error, Result};

/// Classic DTW: no warping window, steps `(i−1, j)`, `(i, j−1)`,
/// `(i−1, j−1)`, local cost `|a_i − b_j|`.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("DTW needs two nonempty series"));
    }
    Ok(dtw_unchecked(a, b))
}

/// DTW for callers that already guarantee nonempty inputs.
pub(crate) fn dtw_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let m = b.len();
    // Two rolling rows of the cumulative cost matrix.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &ai in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = fabs(ai - b[j - 1]) + best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_zero() {
        let s = [0.1, 0.7, 0.3, 1.0];
        assert_eq!(dtw_distance(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn enumerated_examples() {
        assert_eq!(dtw_distance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(dtw_distance(&[], &[1.0]).is_err());
        assert!(dtw_distance(&[1.0], &[]).is_err());
    }
}
