// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference route.
//!
//! Every trace estimate enumerates ordered subject tuples directly
//! (`O(p n^4)` each) and every time sum is evaluated term by term, giving
//! `O(p n^2 T^2 + n^4 T^6)` for the covariance matrix. Nothing here shares code
//! with [`super::fast`] beyond the pair weights; it is the ground truth the
//! fast kernel is checked against.

use nalgebra::DMatrix;

use super::ustat::{bilinear_naive, InnerProducts};
use super::{pair_count, pair_weight, DistanceProcess, TraceDistanceEstimate};
use crate::data::SegmentWindow;
use crate::error::{Error, Result};
use crate::numeric::{falling_factorial, CompensatedSum};

fn require_subjects(w: &SegmentWindow<'_>) -> Result<()> {
    if w.n() < 4 {
        return Err(Error::InvalidInput(format!(
            "the trace estimator needs n >= 4 subjects (got {})",
            w.n()
        )));
    }
    Ok(())
}

/// Unbiased `tr{(Sigma_s1 - Sigma_s2)^2}` by direct enumeration
/// (window-relative, 1-based indices).
pub fn naive_tr_diff_sq(
    w: &SegmentWindow<'_>,
    s1: usize,
    s2: usize,
) -> Result<TraceDistanceEstimate> {
    require_subjects(w)?;
    let len = w.len();
    if s1 == s2 || s1 < 1 || s2 < 1 || s1 > len || s2 > len {
        return Err(Error::InvalidInput(format!(
            "trace distance needs distinct times in 1..={len} (got {s1}, {s2})"
        )));
    }
    let value = bilinear_naive(w, s1, s1, s1, s1) + bilinear_naive(w, s2, s2, s2, s2)
        - 2.0 * bilinear_naive(w, s1, s2, s1, s2);
    Ok(TraceDistanceEstimate {
        s1: w.to_global(s1),
        s2: w.to_global(s2),
        value,
    })
}

/// `D_t` for `t = 1..T-1` as literal averages of pairwise trace distances.
pub fn dhat_naive(w: &SegmentWindow<'_>) -> Result<Vec<f64>> {
    require_subjects(w)?;
    let len = w.len();
    let mut dist = vec![0.0; len * len];
    for s1 in 1..=len {
        for s2 in s1 + 1..=len {
            dist[(s1 - 1) * len + s2 - 1] = naive_tr_diff_sq(w, s1, s2)?.value;
        }
    }
    Ok((1..len)
        .map(|t| {
            let mut acc = CompensatedSum::new();
            for s1 in 1..=t {
                for s2 in t + 1..=len {
                    acc.add(dist[(s1 - 1) * len + s2 - 1]);
                }
            }
            acc.value() / pair_count(len, t)
        })
        .collect())
}

/// Covariance matrix of `(D_1, ..., D_{T-1})` by the literal quadruple sum;
/// every term re-enumerates its subject tuples over cached inner products.
pub fn covariance_naive(w: &SegmentWindow<'_>) -> Result<DMatrix<f64>> {
    require_subjects(w)?;
    let len = w.len();
    let m = len - 1;
    let scale = 4.0 / falling_factorial(w.n(), 2);
    let products = InnerProducts::new(w);
    // nonzero pair weights per t
    let support: Vec<Vec<(usize, usize, f64)>> = (1..len)
        .map(|t| {
            let mut s = Vec::new();
            for a in 1..=len {
                for b in 1..=len {
                    let wt = pair_weight(len, t, a, b);
                    if wt != 0.0 {
                        s.push((a, b, wt));
                    }
                }
            }
            s
        })
        .collect();
    let mut cov = DMatrix::zeros(m, m);
    for t in 1..len {
        for q in t..len {
            let mut acc = CompensatedSum::new();
            // Phi(ab, cd) = Phi(ba, dc) and the weights are symmetric, so
            // pairs with a > b are folded onto a < b
            for &(a, b, wt) in support[t - 1].iter().filter(|&&(a, b, _)| a <= b) {
                let wt = if a < b { 2.0 * wt } else { wt };
                for &(c, d, wq) in &support[q - 1] {
                    let phi = products.bilinear(a, b, c, d);
                    acc.add(wt * wq * phi * phi);
                }
            }
            let v = scale * acc.value() / (pair_count(len, t) * pair_count(len, q));
            cov[(t - 1, q - 1)] = v;
            cov[(q - 1, t - 1)] = v;
        }
    }
    Ok(cov)
}

/// Full distance process through the oracle route.
pub fn dhat_sequence_naive(w: &SegmentWindow<'_>) -> Result<DistanceProcess> {
    let dhat = dhat_naive(w)?;
    let cov = covariance_naive(w)?;
    let variances: Vec<f64> = (0..dhat.len()).map(|k| cov[(k, k)]).collect();
    DistanceProcess::from_parts(w.lo(), dhat, &variances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FunctionalSample;

    #[test]
    fn zero_tensor_is_zero() {
        let s = FunctionalSample::new(5, 3, 2, vec![0.0; 30]).unwrap();
        let w = s.full_window();
        assert_eq!(naive_tr_diff_sq(&w, 1, 2).unwrap().value, 0.0);
        assert!(dhat_naive(&w).unwrap().iter().all(|&d| d == 0.0));
        assert!(matches!(
            dhat_sequence_naive(&w),
            Err(Error::DegenerateVariance { time: 1, .. })
        ));
    }

    #[test]
    fn precondition_errors() {
        let s = FunctionalSample::new(5, 3, 2, vec![1.0; 30]).unwrap();
        let w = s.full_window();
        assert!(naive_tr_diff_sq(&w, 2, 2).is_err());
        assert!(naive_tr_diff_sq(&w, 0, 2).is_err());
        assert!(naive_tr_diff_sq(&w, 1, 4).is_err());
        let small = FunctionalSample::new(3, 3, 2, vec![1.0; 18]).unwrap();
        assert!(naive_tr_diff_sq(&small.full_window(), 1, 2).is_err());
    }

    #[test]
    fn two_time_points_reduce_to_single_pair() {
        let values: Vec<f64> = (0..6 * 2 * 3)
            .map(|k| ((k * 37 % 11) as f64) - 5.0)
            .collect();
        let s = FunctionalSample::new(6, 2, 3, values).unwrap();
        let w = s.full_window();
        let d = dhat_naive(&w).unwrap();
        assert_eq!(d.len(), 1);
        let pair = naive_tr_diff_sq(&w, 1, 2).unwrap().value;
        assert_eq!(d[0], pair / pair_count(2, 1));
    }
}
