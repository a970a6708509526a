// SPDX-License-Identifier: MIT OR Apache-2.0

//! Null distribution of the maximum statistic.
//!
//! Under homogeneity the standardized path is approximately a zero-mean
//! Gaussian vector with the correlation matrix of the estimated process.
//! Critical values and p-values come from Monte-Carlo draws of the maximum of
//! that Gaussian vector.
//!
//! The banded approximation computes the first `b` off-diagonals and the last
//! `w` components of each row exactly and fills the rest of the row by linear
//! interpolation between those two anchors.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SegmentWindow;
use crate::error::{Error, Result};
use crate::estimator::fast::WindowKernel;
use crate::rng::stream_rng;

/// Eigenvalue floor used by [`psd_repair`].
pub const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorrelationMode {
    Exact,
    Banded { b: usize, w: usize },
}

/// Correlation matrix of the statistic process plus a provenance mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    entries: DMatrix<f64>,
    mode: CorrelationMode,
    /// Row-major; `true` where the entry was computed rather than interpolated.
    exact: Vec<bool>,
}

impl CorrelationModel {
    /// Normalizes a covariance matrix; every entry flagged exact.
    pub fn from_covariance(cov: &DMatrix<f64>, lo: usize) -> Result<Self> {
        let m = cov.nrows();
        assert_eq!(m, cov.ncols());
        let sd: Vec<f64> = (0..m)
            .map(|k| {
                let v = cov[(k, k)];
                if v > 0.0 && v.is_finite() {
                    Ok(v.sqrt())
                } else {
                    Err(Error::DegenerateVariance {
                        time: lo + k,
                        value: v,
                    })
                }
            })
            .collect::<Result<_>>()?;
        let entries = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                1.0
            } else {
                (cov[(r, c)] / (sd[r] * sd[c])).clamp(-1.0, 1.0)
            }
        });
        Ok(Self {
            entries,
            mode: CorrelationMode::Exact,
            exact: vec![true; m * m],
        })
    }

    /// Identity correlation of the given size; useful for calibration.
    pub fn identity(size: usize) -> Self {
        Self {
            entries: DMatrix::identity(size, size),
            mode: CorrelationMode::Exact,
            exact: vec![true; size * size],
        }
    }

    /// Wraps an arbitrary symmetric matrix with unit diagonal.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m != entries.ncols() || m == 0 {
            return Err(Error::InvalidInput(
                "correlation matrix must be square and nonempty".into(),
            ));
        }
        for r in 0..m {
            if (entries[(r, r)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("diagonal entry {r} is not 1")));
            }
            for c in 0..m {
                let v = entries[(r, c)];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 || (v - entries[(c, r)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({r}, {c}) is not a valid symmetric correlation"
                    )));
                }
            }
        }
        Ok(Self {
            exact: vec![true; m * m],
            entries,
            mode: CorrelationMode::Exact,
        })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mode(&self) -> CorrelationMode {
        self.mode
    }

    /// Whether entry `(r, c)` (0-based) was computed exactly.
    pub fn is_exact(&self, r: usize, c: usize) -> bool {
        self.exact[r * self.size() + c]
    }

    /// Banded approximation of an exact model: flagged entries are kept
    /// bit-for-bit, the rest are interpolated along rows.
    pub fn banded(&self, b: usize, w: usize) -> Result<Self> {
        if b < 1 || w < 1 {
            return Err(Error::Config(format!(
                "banded approximation needs b >= 1 and w >= 1 (got b={b}, w={w})"
            )));
        }
        let m = self.size();
        // window length T = m + 1; 1-based rows/columns t, q in 1..=m
        let tail_start = m + 1 - w.min(m);
        let flagged = |t: usize, q: usize| t.abs_diff(q) <= b || t >= tail_start || q >= tail_start;
        let mut upper = self.entries.clone();
        let mut exact = vec![true; m * m];
        for t in 1..=m {
            let anchor_lo = t + b;
            let anchor_hi = tail_start;
            if anchor_lo + 1 >= anchor_hi {
                continue;
            }
            let (v0, v1) = (
                self.entries[(t - 1, anchor_lo - 1)],
                self.entries[(t - 1, anchor_hi - 1)],
            );
            for q in anchor_lo + 1..anchor_hi {
                debug_assert!(!flagged(t, q));
                let frac = (q - anchor_lo) as f64 / (anchor_hi - anchor_lo) as f64;
                let v = v0 + (v1 - v0) * frac;
                upper[(t - 1, q - 1)] = v;
                upper[(q - 1, t - 1)] = v;
                exact[(t - 1) * m + q - 1] = false;
                exact[(q - 1) * m + t - 1] = false;
            }
        }
        let entries = (&upper + upper.transpose()) * 0.5;
        Ok(Self {
            entries,
            mode: CorrelationMode::Banded { b, w },
            exact,
        })
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        for r in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|c| format!("{:?}", self.entries[(r, c)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_mask_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        for r in 0..self.size() {
            let row: Vec<&str> = (0..self.size())
                .map(|c| if self.is_exact(r, c) { "1" } else { "0" })
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Writes `path` and a `<path>.mask.csv` sidecar.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mask_path = path.with_extension("mask.csv");
        let mut f =
            std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_csv(&mut f).map_err(|e| Error::io(path, e))?;
        let mut g = std::io::BufWriter::new(
            std::fs::File::create(&mask_path).map_err(|e| Error::io(&mask_path, e))?,
        );
        self.write_mask_csv(&mut g)
            .map_err(|e| Error::io(&mask_path, e))
    }
}

/// Every entry computed exactly.
pub fn estimate_correlation_exact(w: &SegmentWindow<'_>) -> Result<CorrelationModel> {
    let kernel = WindowKernel::new(w)?;
    CorrelationModel::from_covariance(&kernel.covariance_matrix(), w.lo())
}

/// Band of `b` off-diagonals plus the last `w` components of each row exact,
/// everything else interpolated.
pub fn estimate_correlation_banded(
    w: &SegmentWindow<'_>,
    b: usize,
    tail: usize,
) -> Result<CorrelationModel> {
    estimate_correlation_exact(w)?.banded(b, tail)
}

/// Result of [`psd_repair`].
#[derive(Debug, Clone)]
pub struct Repaired {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub clipped: usize,
}

/// Clips eigenvalues below [`EIGEN_FLOOR`], reconstructs, and rescales to a
/// unit diagonal. Matrices already above the floor are returned unchanged.
pub fn psd_repair(m: &DMatrix<f64>) -> Repaired {
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < EIGEN_FLOOR).count();
    if clipped == 0 {
        return Repaired {
            matrix: m.clone(),
            min_eigenvalue,
            clipped,
        };
    }
    let lambda = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(EIGEN_FLOOR)),
    );
    let q = &eig.eigenvectors;
    let rebuilt = q * DMatrix::from_diagonal(&lambda) * q.transpose();
    let size = m.nrows();
    let sd: Vec<f64> = (0..size).map(|k| rebuilt[(k, k)].sqrt()).collect();
    let matrix = DMatrix::from_fn(size, size, |r, c| {
        if r == c {
            1.0
        } else {
            let v = 0.5 * (rebuilt[(r, c)] + rebuilt[(c, r)]);
            (v / (sd[r] * sd[c])).clamp(-1.0, 1.0)
        }
    });
    Repaired {
        matrix,
        min_eigenvalue,
        clipped,
    }
}

/// Sorted Monte-Carlo draws of `max_k X_k`, `X ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullQuantiles {
    pub mc_reps: usize,
    pub seed: u64,
    pub max_samples: Vec<f64>,
}

impl NullQuantiles {
    /// Empirical `(1 - alpha)` quantile: the `ceil((1-alpha) R)`-th order statistic.
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let r = self.max_samples.len();
        let k = ((1.0 - alpha) * r as f64).ceil() as usize;
        self.max_samples[k.clamp(1, r) - 1]
    }

    pub fn p_value(&self, m_n: f64) -> f64 {
        p_value(self, m_n)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "rank,max")?;
        for (k, v) in self.max_samples.iter().enumerate() {
            writeln!(out, "{},{:?}", k + 1, v)?;
        }
        Ok(())
    }
}

/// Add-one Monte-Carlo p-value `(1 + #{draws >= m_n}) / (R + 1)`.
pub fn p_value(q: &NullQuantiles, m_n: f64) -> f64 {
    let r = q.max_samples.len();
    let below = q.max_samples.partition_point(|&x| x < m_n);
    (1 + r - below) as f64 / (r + 1) as f64
}

/// Draws `mc_reps` maxima; replicate `k` uses random stream `(seed, k)`.
pub fn simulate_max_quantiles(
    model: &CorrelationModel,
    mc_reps: usize,
    seed: u64,
) -> Result<NullQuantiles> {
    if mc_reps < 100 {
        return Err(Error::Config(format!(
            "mc_reps >= 100 required (got {mc_reps})"
        )));
    }
    let repaired = psd_repair(model.entries());
    let chol = nalgebra::Cholesky::new(repaired.matrix)
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed after PSD repair".into()))?;
    let l = chol.l();
    let m = model.size();
    let mut max_samples: Vec<f64> = (0..mc_reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut best = f64::NEG_INFINITY;
            for i in 0..m {
                let mut x = 0.0;
                for j in 0..=i {
                    x += l[(i, j)] * z[j];
                }
                best = best.max(x);
            }
            best
        })
        .collect();
    max_samples.sort_by(f64::total_cmp);
    Ok(NullQuantiles {
        mc_reps,
        seed,
        max_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toeplitz(m: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |r, c| rho.powi(r.abs_diff(c) as i32))
    }

    #[test]
    fn identity_size_one_is_standard_normal() {
        let q = simulate_max_quantiles(&CorrelationModel::identity(1), 100_000, 1).unwrap();
        assert!((q.critical_value(0.05) - 1.645).abs() < 0.05);
    }

    #[test]
    fn identity_size_two_matches_closed_form() {
        // Phi(x)^2 = 0.95  =>  x = Phi^{-1}(sqrt(0.95)) = 1.9545
        let q = simulate_max_quantiles(&CorrelationModel::identity(2), 100_000, 2).unwrap();
        assert!((q.critical_value(0.05) - 1.955).abs() < 0.05);
    }

    #[test]
    fn p_value_conventions() {
        let q = simulate_max_quantiles(&CorrelationModel::identity(3), 1000, 5).unwrap();
        assert_eq!(q.p_value(1e9), 1.0 / 1001.0);
        assert_eq!(q.p_value(-1e9), 1.0);
        assert!(q.max_samples.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(q.max_samples.len(), 1000);
    }

    #[test]
    fn critical_value_monotone_in_level() {
        let q = simulate_max_quantiles(&CorrelationModel::identity(4), 2000, 9).unwrap();
        let levels = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001];
        let cv: Vec<f64> = levels.iter().map(|&a| q.critical_value(a)).collect();
        assert!(cv.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let model = CorrelationModel::from_matrix(toeplitz(6, 0.5)).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| simulate_max_quantiles(&model, 500, 42).unwrap());
        let b = three.install(|| simulate_max_quantiles(&model, 500, 42).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn banded_interpolates_linearly() {
        // size 9 (T = 10), b = 1, w = 2: row 1 anchors at q = 2 and q = 8
        let m = 9;
        let mut base = DMatrix::from_fn(m, m, |r, c| if r == c { 1.0 } else { 0.1 });
        base[(0, 1)] = 0.8;
        base[(1, 0)] = 0.8;
        base[(0, 7)] = 0.2;
        base[(7, 0)] = 0.2;
        let exact = CorrelationModel::from_matrix(base).unwrap();
        let banded = exact.banded(1, 2).unwrap();
        // midpoint between q=2 and q=8 is q=5
        assert!((banded.entries()[(0, 4)] - 0.5).abs() < 1e-15);
        assert!(!banded.is_exact(0, 4) && !banded.is_exact(4, 0));
        assert!(banded.is_exact(0, 1) && banded.is_exact(0, 7) && banded.is_exact(0, 8));
        assert!(banded.is_exact(8, 0) && banded.is_exact(7, 3));
        for r in 0..m {
            for c in 0..m {
                if banded.is_exact(r, c) {
                    assert_eq!(
                        banded.entries()[(r, c)].to_bits(),
                        exact.entries()[(r, c)].to_bits()
                    );
                }
                assert_eq!(banded.entries()[(r, c)], banded.entries()[(c, r)]);
            }
        }
    }

    #[test]
    fn wide_band_is_exact() {
        let exact = CorrelationModel::from_matrix(toeplitz(7, 0.7)).unwrap();
        let banded = exact.banded(6, 1).unwrap();
        assert_eq!(banded.entries(), exact.entries());
        assert!((0..7).all(|r| (0..7).all(|c| banded.is_exact(r, c))));
        assert!(exact.banded(0, 3).is_err());
    }

    #[test]
    fn repair_fixes_indefinite_matrix() {
        let mut m = toeplitz(5, 0.9);
        m[(0, 4)] = -0.9;
        m[(4, 0)] = -0.9;
        let rep = psd_repair(&m);
        assert!(rep.min_eigenvalue < 0.0);
        assert!(rep.clipped >= 1);
        let bound = 10.0 * rep.min_eigenvalue.abs();
        let change = (&rep.matrix - &m).abs().max();
        assert!(change <= bound, "{change} > {bound}");
        assert!(nalgebra::Cholesky::new(rep.matrix.clone()).is_some());
        let model = CorrelationModel::from_matrix(m).unwrap();
        assert!(simulate_max_quantiles(&model, 200, 3).is_ok());
    }
}
