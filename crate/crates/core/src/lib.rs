// SPDX-License-Identifier: MIT OR Apache-2.0

//! Covariance homogeneity testing and change-point identification for
//! high-dimensional functional data.
//!
//! The input is an `n x T x p` tensor: `n` independent subjects, each
//! observed at the same `T` time points on `p` variables. The crate tests
//! whether the `p x p` covariance matrices are constant over time and, if
//! not, locates every change via binary segmentation.
//!
//! Layout:
//! - [`data`]: the observation tensor, window views, run configuration, file IO.
//! - [`estimator`]: unbiased U-statistic trace estimators, the distance
//!   process and its standardization, in a brute-force oracle form and a
//!   fast `O(n^2 T^4)` form.
//! - [`quantile`]: correlation of the statistic process (exact or banded)
//!   and Monte-Carlo quantiles of the Gaussian-process maximum.
//! - [`detection`]: one homogeneity test on a window.
//! - [`changepoint`]: location estimator, binary segmentation, grouping.
//! - [`datagen`]: moving-average synthetic data with structured loadings.
//! - [`bench`]: scaled size/power, localization and timing experiments.
//! - [`cli`]: the `fdcov` command-line front end.

pub mod bench;
pub mod changepoint;
pub mod cli;
pub mod data;
pub mod datagen;
pub mod detection;
pub mod error;
pub mod estimator;
pub mod numeric;
pub mod quantile;
pub mod rng;

pub use data::{FunctionalSample, SegmentWindow, TestConfig};

pub use error::{Error, Result};
pub use estimator::DistanceProcess;
pub use changepoint::{
    binary_segmentation, group_change_points, locate_change_point, Cluster, SegmentationResult,
    SplitRecord,
};
pub use detection::{detect, DetectionReport, QuantileMode};
pub use quantile::{CorrelationModel, NullQuantiles};
