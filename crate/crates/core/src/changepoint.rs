// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point location, binary segmentation and grouping.
//!
//! A change point `tau` is the last time index before the covariance changes.
//! Binary segmentation tests `[lo, hi]`; on rejection it records
//! `tau = argmax Z_t` and recurses on `[lo, tau]` and `[tau + 1, hi]`.
//! Windows shorter than `min_segment` are not tested.

use serde::Serialize;

use crate::data::{validate, FunctionalSample, SegmentWindow, TestConfig};
use crate::detection::{detect, QuantileMode};
use crate::error::{Error, Result};
use crate::estimator::fast::dhat_sequence_fast;

/// One node of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub lo: usize,
    pub hi: usize,
    pub m_n: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Estimated change point; present only on rejection.
    pub tau_hat: Option<usize>,
    pub quantile_mode: QuantileMode,
    pub quantile_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub representative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    pub change_points: Vec<usize>,
    /// Pre-order, left child first.
    pub splits: Vec<SplitRecord>,
    pub clusters: Vec<Cluster>,
    pub config: TestConfig,
    pub seed: u64,
}

/// `argmax_t Z_t` over the window, in global time (smallest on ties).
pub fn locate_change_point(window: &SegmentWindow<'_>, min_segment: usize) -> Result<usize> {
    if window.len() < min_segment {
        return Err(Error::InvalidInput(format!(
            "window [{}, {}] has {} time points, fewer than min_segment = {min_segment}",
            window.lo(),
            window.hi(),
            window.len()
        )));
    }
    Ok(dhat_sequence_fast(window)?.argmax_t)
}

fn segment(window: SegmentWindow<'_>, cfg: &TestConfig) -> Result<Vec<SplitRecord>> {
    if window.len() < cfg.min_segment {
        return Ok(Vec::new());
    }
    let report = detect(&window, cfg)?;
    let tau_hat = report.reject.then_some(report.argmax_t);
    let mut out = vec![SplitRecord {
        lo: report.lo,
        hi: report.hi,
        m_n: report.m_n,
        critical_value: report.critical_value,
        p_value: report.p_value,
        reject: report.reject,
        tau_hat,
        quantile_mode: report.quantile_mode,
        quantile_seed: report.quantile_seed,
    }];
    if let Some(tau) = tau_hat {
        let sample = window.sample();
        let (lo, hi) = (window.lo(), window.hi());
        let left = || match tau > lo {
            true => segment(SegmentWindow::new(sample, lo, tau)?, cfg),
            false => Ok(Vec::new()),
        };
        let right = || match tau + 1 < hi {
            true => segment(SegmentWindow::new(sample, tau + 1, hi)?, cfg),
            false => Ok(Vec::new()),
        };
        let (l, r) = rayon::join(left, right);
        out.extend(l?);
        out.extend(r?);
    }
    Ok(out)
}

/// Recursive binary segmentation of the whole sample. Clusters are filled in
/// at `cfg.cluster_gap`.
pub fn binary_segmentation(
    sample: &FunctionalSample,
    cfg: &TestConfig,
) -> Result<SegmentationResult> {
    cfg.check()?;
    let verdict = validate(sample, cfg);
    if !verdict.config.is_empty() {
        return Err(Error::Config(verdict.config.join("; ")));
    }
    if !verdict.sample.is_empty() {
        return Err(Error::InvalidInput(verdict.sample.join("; ")));
    }
    let splits = segment(sample.full_window(), cfg)?;
    let mut change_points: Vec<usize> = splits.iter().filter_map(|s| s.tau_hat).collect();
    change_points.sort_unstable();
    let result = SegmentationResult {
        change_points,
        splits,
        clusters: Vec::new(),
        config: cfg.clone(),
        seed: cfg.seed,
    };
    Ok(group_change_points(result, cfg.cluster_gap))
}

/// Groups sorted points whose successive gaps are at most `gap`.
pub fn cluster_points(points: &[usize], gap: usize) -> Vec<Cluster> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &x in points {
        match clusters.last_mut() {
            Some(c) if x - c[c.len() - 1] <= gap => c.push(x),
            _ => clusters.push(vec![x]),
        }
    }
    clusters
        .into_iter()
        .map(|members| Cluster {
            representative: members[(members.len() - 1) / 2],
            members,
        })
        .collect()
}

/// Replaces the clusters of `result` with those at `cluster_gap`.
pub fn group_change_points(
    mut result: SegmentationResult,
    cluster_gap: usize,
) -> SegmentationResult {
    result.clusters = cluster_points(&result.change_points, cluster_gap);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_ma_process, single_change_design, two_change_design};

    #[test]
    fn clusters() {
        let c = cluster_points(&[39, 40, 41, 42], 3);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].representative, 40);
        let c = cluster_points(&[7], 3);
        assert_eq!(
            c,
            vec![Cluster {
                members: vec![7],
                representative: 7
            }]
        );
        let c = cluster_points(&[2, 25], 3);
        assert_eq!(c.len(), 2);
        let c = cluster_points(&[110, 113, 114, 115, 116], 3);
        assert_eq!((c.len(), c[0].representative), (1, 114));
        assert!(cluster_points(&[], 3).is_empty());
    }

    #[test]
    fn short_window_is_rejected() {
        let s = gen_ma_process(&single_change_design(6, 8, 3, 0.0, 0).unwrap()).unwrap();
        let w = SegmentWindow::new(&s, 2, 4).unwrap();
        assert!(locate_change_point(&w, 4).is_err());
        assert!(locate_change_point(&s.full_window(), 4).unwrap() <= 7);
    }

    #[test]
    fn strong_single_change_is_located() {
        let s = gen_ma_process(&single_change_design(40, 20, 30, 0.3, 3).unwrap()).unwrap();
        assert_eq!(locate_change_point(&s.full_window(), 6).unwrap(), 10);
    }

    #[test]
    fn segmentation_is_deterministic_and_sound() {
        let s = gen_ma_process(&two_change_design(30, 24, 30, 0.6, 8).unwrap()).unwrap();
        let cfg = TestConfig {
            mc_reps: 1000,
            seed: 5,
            ..TestConfig::default()
        };
        let a = binary_segmentation(&s, &cfg).unwrap();
        assert_eq!(a, binary_segmentation(&s, &cfg).unwrap());
        assert!(a.change_points.contains(&12), "{:?}", a.change_points);
        assert!(a.change_points.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.splits[0].lo, 1);
        for rec in &a.splits {
            let w = SegmentWindow::new(&s, rec.lo, rec.hi).unwrap();
            let again = detect(&w, &cfg).unwrap();
            assert_eq!(again.m_n, rec.m_n);
            if let Some(t) = rec.tau_hat {
                assert!(rec.reject && t >= rec.lo && t < rec.hi);
            }
        }
        let members: Vec<usize> = a.clusters.iter().flat_map(|c| c.members.clone()).collect();
        assert_eq!(members, a.change_points);
    }

    #[test]
    fn min_segment_above_t_is_config_error() {
        let s = gen_ma_process(&single_change_design(6, 8, 3, 0.0, 0).unwrap()).unwrap();
        let cfg = TestConfig {
            min_segment: 9,
            ..TestConfig::default()
        };
        assert!(matches!(
            binary_segmentation(&s, &cfg),
            Err(Error::Config(_))
        ));
    }
}
