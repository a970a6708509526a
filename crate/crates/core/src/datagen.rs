// SPDX-License-Identifier: MIT OR Apache-2.0

//! Moving-average synthetic data.
//!
//! Subject `i` at time `t` is `Y_it = sum_{h=0}^{L} A_{t,h} xi_{i,t-h}` with
//! i.i.d. standard normal innovations `xi`. Innovations are indexed
//! `1-L ..= T`, so `L` burn-in vectors precede the first time point and
//!
//! `cov(Y_it, Y_is) = sum_{h=t-s}^{L} A_{t,h} A_{s,h-(t-s)}^T`   for `0 <= t-s <= L`.
//!
//! Each subject draws from its own random stream, so the first `n` subjects
//! of a larger sample coincide with a smaller sample from the same seed.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FunctionalSample;
use crate::error::{Error, Result};
use crate::estimator::pair_count;
use crate::rng::stream_rng;

/// Base of the exponential-decay loading.
pub const EXP_BASE: f64 = 0.6;
/// Lag order used in all simulation designs.
pub const DEFAULT_LAG: usize = 3;

fn in_band(p: usize, i: usize, j: usize) -> bool {
    (i.abs_diff(j) as f64) < p as f64 / 5.0
}

/// `(rho + delta)^{|i-j|}` on the band `|i-j| < p/5`, zero elsewhere.
pub fn make_exp_decay_matrix(p: usize, rho: f64, delta: f64) -> Result<DMatrix<f64>> {
    let base = rho + delta;
    if p == 0 || !(base > 0.0 && base < 1.0) {
        return Err(Error::Config(format!(
            "exponential loading needs p >= 1 and 0 < rho + delta < 1 (got p={p}, rho+delta={base})"
        )));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if in_band(p, i, j) {
            base.powi(i.abs_diff(j) as i32)
        } else {
            0.0
        }
    }))
}

/// `(|i-j| + level * delta_star + 1)^{-2}` on the band `|i-j| < p/5`.
pub fn make_poly_decay_matrix(p: usize, delta_star: f64, level: u32) -> Result<DMatrix<f64>> {
    if p == 0 || delta_star < 0.0 || !delta_star.is_finite() {
        return Err(Error::Config(format!(
            "polynomial loading needs p >= 1 and delta_star >= 0 (got p={p}, delta_star={delta_star})"
        )));
    }
    let offset = level as f64 * delta_star;
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if in_band(p, i, j) {
            (i.abs_diff(j) as f64 + offset + 1.0).powi(-2)
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredMatrixSpec {
    Exponential { rho: f64, delta: f64 },
    Polynomial { delta_star: f64, level: u32 },
    Identity,
}

impl StructuredMatrixSpec {
    pub fn build(&self, p: usize) -> Result<DMatrix<f64>> {
        match *self {
            Self::Exponential { rho, delta } => make_exp_decay_matrix(p, rho, delta),
            Self::Polynomial { delta_star, level } => make_poly_decay_matrix(p, delta_star, level),
            Self::Identity => Ok(DMatrix::identity(p, p)),
        }
    }
}

/// Moving-average generator specification.
///
/// `loadings` holds the distinct matrices; `index[(t-1) * (L+1) + h]` selects
/// the one used for `A_{t,h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MAProcessSpec {
    pub n: usize,
    pub t: usize,
    pub p: usize,
    pub lag: usize,
    pub seed: u64,
    loadings: Vec<DMatrix<f64>>,
    index: Vec<usize>,
}

impl MAProcessSpec {
    pub fn new(
        n: usize,
        t: usize,
        p: usize,
        lag: usize,
        seed: u64,
        loadings: Vec<DMatrix<f64>>,
        index: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 || t == 0 || p == 0 {
            return Err(Error::Config(format!(
                "n, T, p must be positive (got {n}, {t}, {p})"
            )));
        }
        if index.len() != t * (lag + 1) {
            return Err(Error::Config(format!(
                "loading index must have T*(L+1) = {} entries (got {})",
                t * (lag + 1),
                index.len()
            )));
        }
        if let Some(&k) = index.iter().find(|&&k| k >= loadings.len()) {
            return Err(Error::Config(format!("loading index {k} out of range")));
        }
        for (k, a) in loadings.iter().enumerate() {
            if a.nrows() != p || a.ncols() != p {
                return Err(Error::Config(format!("loading {k} is not {p}x{p}")));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("loading {k} has non-finite entries")));
            }
        }
        Ok(Self {
            n,
            t,
            p,
            lag,
            seed,
            loadings,
            index,
        })
    }

    /// Piecewise-constant loadings: `A_{t,h} = blocks[k]` for all `h` while
    /// `t <= ends[k]`. The last end must be `T`.
    pub fn piecewise(
        n: usize,
        t: usize,
        p: usize,
        lag: usize,
        seed: u64,
        blocks: Vec<DMatrix<f64>>,
        ends: &[usize],
    ) -> Result<Self> {
        if blocks.len() != ends.len()
            || ends.last() != Some(&t)
            || ends.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "segment ends must increase and finish at T".into(),
            ));
        }
        let mut index = Vec::with_capacity(t * (lag + 1));
        for time in 1..=t {
            let k = ends.iter().position(|&e| time <= e).unwrap();
            index.extend(std::iter::repeat_n(k, lag + 1));
        }
        Self::new(n, t, p, lag, seed, blocks, index)
    }

    /// `A_{t,h}` for 1-based `t`.
    pub fn loading(&self, t: usize, h: usize) -> &DMatrix<f64> {
        &self.loadings[self.index[(t - 1) * (self.lag + 1) + h]]
    }

    /// Same design with a different sample size or seed.
    pub fn with_n_seed(&self, n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ..self.clone()
        }
    }
}

/// Draws the sample; subject `i` uses random stream `(seed, i)`.
pub fn gen_ma_process(spec: &MAProcessSpec) -> Result<FunctionalSample> {
    let (t_len, p, lag) = (spec.t, spec.p, spec.lag);
    let mut values = vec![0.0; spec.n * t_len * p];
    values
        .par_chunks_mut(t_len * p)
        .enumerate()
        .for_each(|(i, out)| {
            let mut rng = stream_rng(spec.seed, i as u64);
            let xi: Vec<DVector<f64>> = (0..t_len + lag)
                .map(|_| DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng)))
                .collect();
            for t in 1..=t_len {
                let mut y = DVector::zeros(p);
                for h in 0..=lag {
                    // innovation t-h lives at offset (t - h) + lag - 1
                    y.gemv(1.0, spec.loading(t, h), &xi[t + lag - 1 - h], 1.0);
                }
                out[(t - 1) * p..t * p].copy_from_slice(y.as_slice());
            }
        });
    FunctionalSample::new(spec.n, t_len, p, values)
}

/// `cov(Y_it, Y_is)` for 1-based times.
pub fn cross_covariance(spec: &MAProcessSpec, t: usize, s: usize) -> DMatrix<f64> {
    if t < s {
        return cross_covariance(spec, s, t).transpose();
    }
    let d = t - s;
    let mut c = DMatrix::zeros(spec.p, spec.p);
    if d > spec.lag {
        return c;
    }
    for h in d..=spec.lag {
        c += spec.loading(t, h) * spec.loading(s, h - d).transpose();
    }
    c
}

/// `Sigma_t = sum_h A_{t,h} A_{t,h}^T`.
pub fn covariance_at(spec: &MAProcessSpec, t: usize) -> DMatrix<f64> {
    cross_covariance(spec, t, t)
}

/// Exact `D_t`, `t = 1 ..= T-1`.
pub fn true_distance_process(spec: &MAProcessSpec) -> Vec<f64> {
    let sigmas: Vec<DMatrix<f64>> = (1..=spec.t).map(|t| covariance_at(spec, t)).collect();
    let tr = |a: usize, b: usize| {
        let d = &sigmas[a - 1] - &sigmas[b - 1];
        d.iter().map(|v| v * v).sum::<f64>()
    };
    (1..spec.t)
        .map(|t| {
            let mut total = 0.0;
            for s1 in 1..=t {
                for s2 in t + 1..=spec.t {
                    total += tr(s1, s2);
                }
            }
            total / pair_count(spec.t, t)
        })
        .collect()
}

/// First change time `floor(T/2)`.
pub fn first_change(t: usize) -> usize {
    t / 2
}

/// Exponential loadings `B1` up to `floor(T/2)`, `B2` (shifted by `delta`) after.
pub fn single_change_design(
    n: usize,
    t: usize,
    p: usize,
    delta: f64,
    seed: u64,
) -> Result<MAProcessSpec> {
    let tau = first_change(t);
    if tau < 1 || tau >= t {
        return Err(Error::Config(format!(
            "T = {t} too small for a change design"
        )));
    }
    let b1 = make_exp_decay_matrix(p, EXP_BASE, 0.0)?;
    let b2 = make_exp_decay_matrix(p, EXP_BASE, delta)?;
    MAProcessSpec::piecewise(n, t, p, DEFAULT_LAG, seed, vec![b1, b2], &[tau, t])
}

/// Polynomial loadings with changes after `floor(T/2)` and `floor(T/2) + 2`.
pub fn two_change_design(
    n: usize,
    t: usize,
    p: usize,
    delta_star: f64,
    seed: u64,
) -> Result<MAProcessSpec> {
    let tau1 = first_change(t);
    let tau2 = tau1 + 2;
    if tau1 < 1 || tau2 >= t {
        return Err(Error::Config(format!(
            "T = {t} too small for a two-change design"
        )));
    }
    let blocks = (0..3)
        .map(|level| make_poly_decay_matrix(p, delta_star, level))
        .collect::<Result<Vec<_>>>()?;
    MAProcessSpec::piecewise(n, t, p, DEFAULT_LAG, seed, blocks, &[tau1, tau2, t])
}

/// Declarative design, as read from a simulation config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Design {
    /// Identity loadings, no change.
    White {
        n: usize,
        t: usize,
        p: usize,
        lag: usize,
        seed: u64,
    },
    SingleChange {
        n: usize,
        t: usize,
        p: usize,
        delta: f64,
        seed: u64,
    },
    TwoChange {
        n: usize,
        t: usize,
        p: usize,
        delta_star: f64,
        seed: u64,
    },
}

impl Design {
    pub fn spec(&self) -> Result<MAProcessSpec> {
        match *self {
            Self::White { n, t, p, lag, seed } => {
                MAProcessSpec::piecewise(n, t, p, lag, seed, vec![DMatrix::identity(p, p)], &[t])
            }
            Self::SingleChange {
                n,
                t,
                p,
                delta,
                seed,
            } => single_change_design(n, t, p, delta, seed),
            Self::TwoChange {
                n,
                t,
                p,
                delta_star,
                seed,
            } => two_change_design(n, t, p, delta_star, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matrix_band() {
        let b = make_exp_decay_matrix(6, 0.6, 0.0).unwrap();
        assert_eq!(b[(0, 1)], 0.6);
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(3, 3)], 1.0);
        assert_eq!(make_exp_decay_matrix(1, 0.6, 0.1).unwrap()[(0, 0)], 1.0);
        assert!(make_exp_decay_matrix(4, 0.6, 0.5).is_err());
        // p = 10: cutoff 2 is strict
        let b = make_exp_decay_matrix(10, 0.6, 0.0).unwrap();
        assert!((b[(0, 1)] - 0.6).abs() < 1e-15 && b[(0, 2)] == 0.0);
    }

    #[test]
    fn poly_matrix_levels() {
        let p = 20;
        let b1 = make_poly_decay_matrix(p, 0.9, 0).unwrap();
        assert_eq!(b1, make_poly_decay_matrix(p, 0.0, 2).unwrap());
        let b3 = make_poly_decay_matrix(p, 0.35, 2).unwrap();
        assert!((b3[(0, 0)] - 1.0 / 1.7f64.powi(2)).abs() < 1e-15);
        assert!((b3[(0, 3)] - 1.0 / 4.7f64.powi(2)).abs() < 1e-15);
        assert_eq!(b3[(0, 4)], 0.0);
    }

    #[test]
    fn white_noise_has_identity_covariance() {
        let spec = Design::White {
            n: 3,
            t: 4,
            p: 2,
            lag: 0,
            seed: 1,
        }
        .spec()
        .unwrap();
        assert_eq!(cross_covariance(&spec, 2, 2), DMatrix::identity(2, 2));
        assert_eq!(cross_covariance(&spec, 3, 2), DMatrix::zeros(2, 2));
        assert!(true_distance_process(&spec).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn seeded_and_nested() {
        let spec = single_change_design(6, 8, 5, 0.1, 9).unwrap();
        let a = gen_ma_process(&spec).unwrap();
        assert_eq!(a, gen_ma_process(&spec).unwrap());
        let small = gen_ma_process(&spec.with_n_seed(4, 9)).unwrap();
        assert_eq!(small, a.select_subjects(&[0, 1, 2, 3]).unwrap());
        let other = gen_ma_process(&spec.with_n_seed(6, 10)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn hand_computed_distance() {
        // T = 2, Sigma_1 = I, Sigma_2 = 2I (A = sqrt(2) I), p = 3
        let spec = MAProcessSpec::piecewise(
            1,
            2,
            3,
            0,
            0,
            vec![
                DMatrix::identity(3, 3),
                DMatrix::identity(3, 3) * 2f64.sqrt(),
            ],
            &[1, 2],
        )
        .unwrap();
        let d = true_distance_process(&spec);
        assert!((d[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn change_designs_peak_at_change() {
        for t in [20, 30, 50] {
            let spec = single_change_design(1, t, 10, 0.1, 0).unwrap();
            let d = true_distance_process(&spec);
            let arg = crate::estimator::max_of_path(&d).1;
            assert!(arg.abs_diff(first_change(t)) <= 1, "T={t}: {arg}");
            let spec = two_change_design(1, t, 10, 0.35, 0).unwrap();
            let d = true_distance_process(&spec);
            let arg = crate::estimator::max_of_path(&d).1;
            assert!(arg.abs_diff(first_change(t)) <= 2, "T={t}: {arg}");
        }
        let null = single_change_design(1, 10, 10, 0.0, 0).unwrap();
        assert!(true_distance_process(&null).iter().all(|&d| d == 0.0));
    }
}
