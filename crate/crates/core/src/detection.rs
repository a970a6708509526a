// SPDX-License-Identifier: MIT OR Apache-2.0

//! Homogeneity test on one window.

use serde::{Deserialize, Serialize};

use crate::data::{SegmentWindow, TestConfig};
use crate::error::{Error, Result};
use crate::estimator::fast::WindowKernel;
use crate::estimator::DistanceProcess;
use crate::quantile::{simulate_max_quantiles, CorrelationMode, CorrelationModel};
use crate::rng::mix_seed;

/// How the null correlation matrix is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QuantileMode {
    Exact,
    Banded { b: usize, w: usize },
}

impl QuantileMode {
    /// Mode implied by `cfg` for a window of `len` time points. Banding needs
    /// `b + w < len - 1`; otherwise every entry is computed anyway.
    pub fn for_window(cfg: &TestConfig, len: usize) -> Self {
        if cfg.approx_enabled && cfg.band_b + cfg.tail_w + 1 < len {
            QuantileMode::Banded {
                b: cfg.band_b,
                w: cfg.tail_w,
            }
        } else {
            QuantileMode::Exact
        }
    }
}

/// Test outcome for one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub lo: usize,
    pub hi: usize,
    pub n: usize,
    pub p: usize,
    pub m_n: f64,
    pub argmax_t: usize,
    pub alpha: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub quantile_mode: QuantileMode,
    pub mc_reps: usize,
    /// Seed of the Monte-Carlo stream actually used for this window.
    pub quantile_seed: u64,
    pub config: TestConfig,
    #[serde(skip)]
    pub process: DistanceProcess,
}

/// Quantile seed for the window `[lo, hi]` under run seed `seed`.
pub fn window_seed(seed: u64, lo: usize, hi: usize) -> u64 {
    mix_seed(seed, ((lo as u64) << 32) | hi as u64)
}

/// Distance process and exact correlation model of a window, reusable across
/// quantile modes.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub n: usize,
    pub p: usize,
    pub process: DistanceProcess,
    pub exact: CorrelationModel,
}

impl WindowAnalysis {
    pub fn new(window: &SegmentWindow<'_>) -> Result<Self> {
        if window.len() < 2 {
            return Err(Error::InvalidInput(
                "window needs at least two time points".into(),
            ));
        }
        let kernel = WindowKernel::new(window)?;
        let process = kernel.process()?;
        let exact = CorrelationModel::from_covariance(&kernel.covariance_matrix(), window.lo())?;
        Ok(Self {
            n: window.n(),
            p: window.p(),
            process,
            exact,
        })
    }

    pub fn model(&self, mode: QuantileMode) -> Result<CorrelationModel> {
        match mode {
            QuantileMode::Exact => Ok(self.exact.clone()),
            QuantileMode::Banded { b, w } => self.exact.banded(b, w),
        }
    }

    /// Runs the test with an explicit quantile mode.
    pub fn test(&self, cfg: &TestConfig, mode: QuantileMode) -> Result<DetectionReport> {
        cfg.check()?;
        let model = self.model(mode)?;
        debug_assert!(match mode {
            QuantileMode::Exact => model.mode() == CorrelationMode::Exact,
            QuantileMode::Banded { .. } => model.mode() != CorrelationMode::Exact,
        });
        let (lo, hi) = (self.process.lo, self.process.hi);
        let quantile_seed = window_seed(cfg.seed, lo, hi);
        let quantiles = simulate_max_quantiles(&model, cfg.mc_reps, quantile_seed)?;
        let critical_value = quantiles.critical_value(cfg.alpha);
        let p_value = quantiles.p_value(self.process.m_n);
        Ok(DetectionReport {
            lo,
            hi,
            n: self.n,
            p: self.p,
            m_n: self.process.m_n,
            argmax_t: self.process.argmax_t,
            alpha: cfg.alpha,
            critical_value,
            p_value,
            reject: p_value < cfg.alpha,
            quantile_mode: mode,
            mc_reps: cfg.mc_reps,
            quantile_seed,
            config: cfg.clone(),
            process: self.process.clone(),
        })
    }
}

/// Tests covariance homogeneity on `window` with the mode implied by `cfg`.
pub fn detect(window: &SegmentWindow<'_>, cfg: &TestConfig) -> Result<DetectionReport> {
    cfg.check()?;
    let analysis = WindowAnalysis::new(window)?;
    analysis.test(cfg, QuantileMode::for_window(cfg, window.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_ma_process, single_change_design};

    #[test]
    fn mode_selection() {
        let cfg = TestConfig::default();
        assert_eq!(QuantileMode::for_window(&cfg, 16), QuantileMode::Exact);
        assert_eq!(
            QuantileMode::for_window(&cfg, 17),
            QuantileMode::Banded { b: 5, w: 10 }
        );
        let exact = TestConfig {
            approx_enabled: false,
            ..cfg
        };
        assert_eq!(QuantileMode::for_window(&exact, 100), QuantileMode::Exact);
    }

    #[test]
    fn strong_change_is_rejected() {
        let s = gen_ma_process(&single_change_design(30, 12, 20, 0.3, 4).unwrap()).unwrap();
        let cfg = TestConfig {
            mc_reps: 2000,
            ..TestConfig::default()
        };
        let r = detect(&s.full_window(), &cfg).unwrap();
        assert!(r.reject, "{r:?}");
        assert!(r.p_value < 0.01);
        assert_eq!(r.argmax_t, 6);
        assert_eq!(r, detect(&s.full_window(), &cfg).unwrap());
    }

    #[test]
    fn report_echoes_config() {
        let s = gen_ma_process(&single_change_design(8, 6, 4, 0.0, 1).unwrap()).unwrap();
        let cfg = TestConfig {
            mc_reps: 300,
            seed: 77,
            ..TestConfig::default()
        };
        let r = detect(&s.full_window(), &cfg).unwrap();
        assert_eq!(r.config, cfg);
        assert_eq!(r.quantile_seed, window_seed(77, 1, 6));
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["quantile_mode"]["mode"], "exact");
    }
}
