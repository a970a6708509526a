// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observation tensor, window views and run configuration.
//!
//! Time indices are 1-based everywhere in the public API.

mod io;

pub use io::{load_sample, read_fdt1, read_long_csv, write_fdt1, write_long_csv, write_sample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optional axis labels. Purely cosmetic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisLabels {
    pub subjects: Option<Vec<String>>,
    pub times: Option<Vec<String>>,
    pub variables: Option<Vec<String>>,
}

/// `n x T x p` tensor of real observations, stored `[subject][time][variable]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    n: usize,
    t: usize,
    p: usize,
    values: Vec<f64>,
    labels: AxisLabels,
}

impl FunctionalSample {
    /// Builds a sample, rejecting shape mismatches and non-finite entries.
    pub fn new(n: usize, t: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || t == 0 || p == 0 {
            return Err(Error::Dimension(format!(
                "all dimensions must be positive (n={n}, T={t}, p={p})"
            )));
        }
        let expected = n
            .checked_mul(t)
            .and_then(|x| x.checked_mul(p))
            .ok_or_else(|| Error::Dimension("n*T*p overflows".into()))?;
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected n*T*p = {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                subject: pos / (t * p) + 1,
                time: (pos / p) % t + 1,
                variable: pos % p + 1,
            });
        }
        Ok(Self {
            n,
            t,
            p,
            values,
            labels: AxisLabels::default(),
        })
    }

    pub fn with_labels(mut self, labels: AxisLabels) -> Result<Self> {
        let check = |name: &str, v: &Option<Vec<String>>, len: usize| match v {
            Some(v) if v.len() != len => Err(Error::Dimension(format!(
                "{name} labels: expected {len}, got {}",
                v.len()
            ))),
            _ => Ok(()),
        };
        check("subject", &labels.subjects, self.n)?;
        check("time", &labels.times, self.t)?;
        check("variable", &labels.variables, self.p)?;
        self.labels = labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of time points `T`.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &AxisLabels {
        &self.labels
    }

    /// Observation vector of `subject` (0-based) at 1-based `time`.
    pub fn observation(&self, subject: usize, time: usize) -> &[f64] {
        let start = (subject * self.t + (time - 1)) * self.p;
        &self.values[start..start + self.p]
    }

    /// Window covering all time points.
    pub fn full_window(&self) -> SegmentWindow<'_> {
        SegmentWindow {
            sample: self,
            lo: 1,
            hi: self.t,
        }
    }

    /// Subset of subjects (0-based indices, in the given order).
    pub fn select_subjects(&self, subjects: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(subjects.len() * self.t * self.p);
        for &s in subjects {
            if s >= self.n {
                return Err(Error::InvalidInput(format!(
                    "subject index {s} out of range (n = {})",
                    self.n
                )));
            }
            values.extend_from_slice(&self.values[s * self.t * self.p..(s + 1) * self.t * self.p]);
        }
        FunctionalSample::new(subjects.len(), self.t, self.p, values)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        FunctionalSample::new(
            self.n,
            self.t,
            self.p,
            self.values.iter().map(|v| v * c).collect(),
        )
    }
}

/// Zero-copy view of the time range `[lo, hi]` (1-based, inclusive).
#[derive(Debug, Clone, Copy)]
pub struct SegmentWindow<'a> {
    sample: &'a FunctionalSample,
    lo: usize,
    hi: usize,
}

impl<'a> SegmentWindow<'a> {
    pub fn new(sample: &'a FunctionalSample, lo: usize, hi: usize) -> Result<Self> {
        if lo < 1 || lo >= hi || hi > sample.t {
            return Err(Error::InvalidInput(format!(
                "window [{lo}, {hi}] invalid for T = {} (need 1 <= lo < hi <= T)",
                sample.t
            )));
        }
        Ok(Self { sample, lo, hi })
    }

    pub fn sample(&self) -> &'a FunctionalSample {
        self.sample
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    /// Number of time points `hi - lo + 1`.
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self) -> usize {
        self.sample.n
    }

    pub fn p(&self) -> usize {
        self.sample.p
    }

    /// Observation of `subject` (0-based) at window-relative time `local` (1-based).
    pub fn observation(&self, subject: usize, local: usize) -> &'a [f64] {
        debug_assert!(local >= 1 && local <= self.len());
        self.sample.observation(subject, self.lo + local - 1)
    }

    pub fn to_global(&self, local: usize) -> usize {
        self.lo + local - 1
    }

    /// Sub-window `[lo', hi']` given in coordinates relative to this window.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<SegmentWindow<'a>> {
        if lo < 1 || lo >= hi || hi > self.len() {
            return Err(Error::InvalidInput(format!(
                "relative window [{lo}, {hi}] invalid for window length {}",
                self.len()
            )));
        }
        Ok(SegmentWindow {
            sample: self.sample,
            lo: self.lo + lo - 1,
            hi: self.lo + hi - 1,
        })
    }

    /// Copies the window out as a standalone sample.
    pub fn to_sample(&self) -> FunctionalSample {
        let (n, p, len) = (self.n(), self.p(), self.len());
        let mut values = Vec::with_capacity(n * len * p);
        for i in 0..n {
            for t in 1..=len {
                values.extend_from_slice(self.observation(i, t));
            }
        }
        FunctionalSample::new(n, len, p, values).expect("window of a valid sample is valid")
    }
}

/// Zero-copy window; see [`SegmentWindow::new`].
pub fn slice_window(sample: &FunctionalSample, lo: usize, hi: usize) -> Result<SegmentWindow<'_>> {
    SegmentWindow::new(sample, lo, hi)
}

/// Settings shared by detection, segmentation and the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub mc_reps: usize,
    pub band_b: usize,
    pub tail_w: usize,
    pub approx_enabled: bool,
    pub seed: u64,
    pub min_segment: usize,
    pub cluster_gap: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mc_reps: 10_000,
            band_b: 5,
            tail_w: 10,
            approx_enabled: true,
            seed: 0,
            min_segment: 6,
            cluster_gap: 3,
        }
    }
}

impl TestConfig {
    /// Every violated configuration invariant, as human-readable messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("alpha must lie in (0, 1) (got {})", self.alpha));
        }
        if self.mc_reps < 100 {
            out.push(format!("mc_reps >= 100 required (got {})", self.mc_reps));
        }
        if self.band_b < 1 {
            out.push("band_b >= 1 required".to_string());
        }
        if self.tail_w < 1 {
            out.push("tail_w >= 1 required".to_string());
        }
        if self.min_segment < 4 {
            out.push(format!(
                "min_segment >= 4 required (got {})",
                self.min_segment
            ));
        }
        if self.cluster_gap < 1 {
            out.push("cluster_gap >= 1 required".to_string());
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Outcome of [`validate`]. Empty lists mean the sample is usable.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Verdict {
    pub sample: Vec<String>,
    pub config: Vec<String>,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.sample.is_empty() && self.config.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.sample
            .iter()
            .chain(&self.config)
            .any(|m| m.contains(needle))
    }
}

/// Checks a sample and configuration for use in detection.
pub fn validate(sample: &FunctionalSample, cfg: &TestConfig) -> Verdict {
    let mut sample_problems = Vec::new();
    if sample.n < 4 {
        sample_problems.push(format!("n ≥ 4 required (got {})", sample.n));
    }
    if sample.t < 2 {
        sample_problems.push(format!("T ≥ 2 required (got {})", sample.t));
    }
    if sample.p < 1 {
        sample_problems.push("p ≥ 1 required".to_string());
    }
    if let Some(pos) = sample.values.iter().position(|v| !v.is_finite()) {
        sample_problems.push(format!("non-finite value at flat position {pos}"));
    }
    let mut config = cfg.problems();
    if cfg.min_segment > sample.t {
        config.push(format!(
            "min_segment ({}) exceeds T ({})",
            cfg.min_segment, sample.t
        ));
    }
    Verdict {
        sample: sample_problems,
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, t: usize, p: usize) -> FunctionalSample {
        let values = (0..n * t * p).map(|x| x as f64).collect();
        FunctionalSample::new(n, t, p, values).unwrap()
    }

    #[test]
    fn rejects_non_finite_with_index() {
        let mut values = vec![0.0; 4 * 6 * 8];
        // subject 3, time 5, variable 7 (1-based)
        values[(2 * 6 + 4) * 8 + 6] = f64::NAN;
        match FunctionalSample::new(4, 6, 8, values) {
            Err(Error::NonFinite {
                subject,
                time,
                variable,
            }) => assert_eq!((subject, time, variable), (3, 5, 7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn verdicts() {
        let cfg = TestConfig::default();
        assert!(validate(&ramp(3, 10, 2), &cfg).contains("n ≥ 4 required"));
        assert!(validate(
            &ramp(5, 1, 2),
            &TestConfig {
                min_segment: 4,
                ..cfg.clone()
            }
        )
        .contains("T ≥ 2 required"));
        let fmri_shape = FunctionalSample::new(17, 131, 268, vec![0.5; 17 * 131 * 268]).unwrap();
        assert!(validate(&fmri_shape, &cfg).is_ok());
        let v = validate(&ramp(4, 5, 1), &cfg);
        assert!(v.contains("min_segment"));
        assert_eq!(v, validate(&ramp(4, 5, 1), &cfg));
    }

    #[test]
    fn config_problems() {
        let bad = TestConfig {
            alpha: 1.0,
            mc_reps: 10,
            min_segment: 3,
            ..TestConfig::default()
        };
        assert_eq!(bad.problems().len(), 3);
        assert!(TestConfig::default().check().is_ok());
    }

    #[test]
    fn windows() {
        let s = ramp(4, 30, 2);
        let full = slice_window(&s, 1, 30).unwrap();
        assert_eq!(full.len(), 30);
        assert_eq!(full.to_sample(), s);
        let w = slice_window(&s, 3, 25).unwrap();
        assert_eq!(w.len(), 23);
        assert_eq!(w.observation(1, 1), s.observation(1, 3));
        assert!(slice_window(&s, 5, 5).is_err());
        assert!(slice_window(&s, 0, 5).is_err());
        assert!(slice_window(&s, 2, 31).is_err());
    }

    #[test]
    fn window_slices_compose() {
        let s = ramp(4, 40, 1);
        for (a, b, c, d) in [(1, 40, 3, 9), (5, 30, 1, 26), (10, 20, 2, 11)] {
            let nested = slice_window(&s, a, b).unwrap().slice(c, d).unwrap();
            let direct = slice_window(&s, a + c - 1, a + d - 1).unwrap();
            assert_eq!((nested.lo(), nested.hi()), (direct.lo(), direct.hi()));
        }
    }
}
