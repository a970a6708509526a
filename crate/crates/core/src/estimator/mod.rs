// SPDX-License-Identifier: MIT OR Apache-2.0

//! Distance process `D_t` between the covariance matrices before and after
//! each time `t`, its unbiased estimate, and the standardized statistic.
//!
//! For a window of `T` time points and `t = 1..T-1`
//!
//! ```text
//! D_t = 1/w(t) * sum_{s1 <= t < s2} tr{(Sigma_s1 - Sigma_s2)^2},   w(t) = t (T - t).
//! ```
//!
//! Every trace is estimated by a U-statistic over distinct subjects, which is
//! exactly unbiased for arbitrary per-time means and arbitrary cross-time
//! covariances. The standardizer uses the leading-order variance of the
//! estimator,
//!
//! ```text
//! cov(D_t, D_q) = 4 / (n (n-1) w(t) w(q))
//!                 * sum_{a,b,c,d} W_t(a,b) W_q(c,d) tr^2(C_ac C_db),
//! ```
//!
//! with `C_ac = cov(Y_a, Y_c)` and `W_t` the pair weights from [`pair_weight`].
//! `tr(C_ac C_db)` is itself estimated by the same four-subject U-statistic.
//!
//! Two independent routes compute all of this: [`oracle`] enumerates subject
//! tuples and time sums literally, [`fast`] works from a Gram matrix with
//! inclusion-exclusion over subjects and prefix recursions over time.

pub mod fast;
pub mod oracle;
pub mod ustat;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// `w(t) = t (T - t)`: the number of time pairs straddling `t`.
pub fn pair_count(len: usize, t: usize) -> f64 {
    (t * (len - t)) as f64
}

/// Coefficient of `tr(Sigma_a Sigma_b)` in `w(t) D_t` after splitting each
/// cross term symmetrically. Rows sum to zero.
pub fn pair_weight(len: usize, t: usize, a: usize, b: usize) -> f64 {
    let left = |x: usize| x <= t;
    if a == b {
        if left(a) {
            (len - t) as f64
        } else {
            t as f64
        }
    } else if left(a) != left(b) {
        -1.0
    } else {
        0.0
    }
}

/// Unbiased estimate of `tr{(Sigma_s1 - Sigma_s2)^2}`. May be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceDistanceEstimate {
    pub s1: usize,
    pub s2: usize,
    pub value: f64,
}

/// Estimated distance process of one window, in global time coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceProcess {
    /// Global time index of the window's first point.
    pub lo: usize,
    /// Global time index of the window's last point.
    pub hi: usize,
    pub dhat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub zhat: Vec<f64>,
    pub m_n: f64,
    /// Global time index attaining `m_n` (smallest on ties).
    pub argmax_t: usize,
}

impl DistanceProcess {
    /// Standardizes `dhat` by `sqrt(variances)`; errors on any non-positive variance.
    pub fn from_parts(lo: usize, dhat: Vec<f64>, variances: &[f64]) -> Result<Self> {
        assert_eq!(dhat.len(), variances.len());
        assert!(
            !dhat.is_empty(),
            "distance process needs at least two time points"
        );
        let mut sigma_hat = Vec::with_capacity(variances.len());
        for (k, &v) in variances.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DegenerateVariance {
                    time: lo + k,
                    value: v,
                });
            }
            sigma_hat.push(v.sqrt());
        }
        let zhat: Vec<f64> = dhat.iter().zip(&sigma_hat).map(|(d, s)| d / s).collect();
        if let Some(k) = zhat.iter().position(|z| !z.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite standardized statistic at t = {}",
                lo + k
            )));
        }
        let (m_n, local) = max_with_index(&zhat);
        Ok(Self {
            lo,
            hi: lo + dhat.len(),
            dhat,
            sigma_hat,
            zhat,
            m_n,
            argmax_t: lo + local - 1,
        })
    }

    /// Number of time points in the window.
    pub fn window_len(&self) -> usize {
        self.dhat.len() + 1
    }

    /// Global time index of position `k` (0-based) of the sequences.
    pub fn time_at(&self, k: usize) -> usize {
        self.lo + k
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,dhat,sigma_hat,zhat")?;
        for k in 0..self.dhat.len() {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                self.time_at(k),
                self.dhat[k],
                self.sigma_hat[k],
                self.zhat[k]
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file =
            std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_csv(&mut file).map_err(|e| Error::io(path, e))
    }
}

/// Maximum and its smallest 1-based position.
fn max_with_index(values: &[f64]) -> (f64, usize) {
    let mut best = (values[0], 1);
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > best.0 {
            best = (v, k + 1);
        }
    }
    best
}

/// `(m_n, argmax_t)` of a process; `argmax_t` is a global time index.
pub fn max_statistic(process: &DistanceProcess) -> (f64, usize) {
    (process.m_n, process.argmax_t)
}

/// `(max, argmax)` of a raw standardized path; the index is 1-based.
pub fn max_of_path(zhat: &[f64]) -> (f64, usize) {
    max_with_index(zhat)
}
