// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fast route: `O(p (nT)^2 + n^2 T^4)` for the whole statistic process and
//! its covariance.
//!
//! 1. One Gram matrix `G[(i,a),(j,b)] = Y_ia' Y_jb` of the window.
//! 2. Every four-subject sum is rewritten through row sums, column sums and
//!    `sum_{i != j}` products of Gram blocks, so each `tr(C_ac C_db)` estimate
//!    costs `O(n^2)`; the `S2` terms for all time quadruples form one matrix
//!    product.
//! 3. The time double sums `sum_{s1 <= t < s2}` are evaluated for all `t` at
//!    once by moving `t` one step at a time and correcting the running sum
//!    with one row and one column.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{pair_count, DistanceProcess};
use crate::data::SegmentWindow;
use crate::error::{Error, Result};
use crate::numeric::{falling_factorial, gemm_abt, CompensatedSum};

/// Rows of pair data processed per parallel work item. Depends only on `n`,
/// so results do not depend on the worker count. Small `n` makes the products
/// memory bound and favours short blocks; large `n` favours tall ones.
fn block_rows(n: usize) -> usize {
    (n * (n - 1) / 4).clamp(4, 32)
}

/// For `q = 1..len-1`:
/// `(len-q) * sum_{c<=q} diag_c + q * sum_{c>q} diag_c - sum_{c<=q<d} h(c, d)`.
///
/// `h` is only queried for `c < d`.
pub(crate) fn weighted_contraction(
    len: usize,
    diag: &[f64],
    h: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    debug_assert_eq!(diag.len(), len);
    let mut suffix = vec![0.0; len + 1];
    let mut acc = CompensatedSum::new();
    for c in (1..=len).rev() {
        acc.add(diag[c - 1]);
        suffix[c] = acc.value();
    }
    let mut prefix = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    let mut out = Vec::with_capacity(len.saturating_sub(1));
    for q in 1..len {
        prefix.add(diag[q - 1]);
        for c in 1..q {
            cross.add(-h(c, q));
        }
        for d in q + 1..=len {
            cross.add(h(q, d));
        }
        out.push((len - q) as f64 * prefix.value() + q as f64 * suffix[q + 1] - cross.value());
    }
    out
}

/// Upper-triangular enumeration of time pairs `a <= b` (1-based).
#[derive(Debug, Clone)]
struct UpperPairs {
    len: usize,
    offsets: Vec<usize>,
}

impl UpperPairs {
    fn new(len: usize) -> Self {
        let mut offsets = Vec::with_capacity(len + 1);
        let mut acc = 0;
        for a in 1..=len {
            offsets.push(acc);
            acc += len - a + 1;
        }
        offsets.push(acc);
        Self { len, offsets }
    }

    fn count(&self) -> usize {
        self.offsets[self.len]
    }

    fn index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a <= b);
        self.offsets[a - 1] + (b - a)
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.len).flat_map(move |a| (a..=self.len).map(move |b| (a, b)))
    }
}

/// Gram-derived per-(c,d) quantities for all ordered time pairs.
struct PairTable {
    n: usize,
    len: usize,
    /// `len^2 x n(n-1)`: off-diagonal entries of each Gram block, `i` major.
    x: Vec<f64>,
    /// `len^2 x n`: row sums over `j != i`.
    rows: Vec<f64>,
    /// `len^2 x n`: column sums over `i != j`.
    cols: Vec<f64>,
    /// `len^2`: total off-diagonal sums.
    totals: Vec<f64>,
}

impl PairTable {
    fn build(w: &SegmentWindow<'_>) -> Self {
        let (n, len, p) = (w.n(), w.len(), w.p());
        let big = n * len;
        let mut y = Vec::with_capacity(big * p);
        for i in 0..n {
            for a in 1..=len {
                y.extend_from_slice(w.observation(i, a));
            }
        }
        let gram = gemm_abt(big, p, big, &y, &y);
        let g = |i: usize, a: usize, j: usize, b: usize| {
            gram[(i * len + a - 1) * big + j * len + b - 1]
        };

        let npairs = n * (n - 1);
        let nrows = len * len;
        let mut x = vec![0.0; nrows * npairs];
        let mut rows = vec![0.0; nrows * n];
        let mut cols = vec![0.0; nrows * n];
        let mut totals = vec![0.0; nrows];
        for c in 1..=len {
            for d in 1..=len {
                let r = (c - 1) * len + d - 1;
                let xr = &mut x[r * npairs..(r + 1) * npairs];
                let mut k = 0;
                let mut total = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let v = g(i, c, j, d);
                        xr[k] = v;
                        k += 1;
                        rows[r * n + i] += v;
                        cols[r * n + j] += v;
                        total += v;
                    }
                }
                totals[r] = total;
            }
        }
        Self {
            n,
            len,
            x,
            rows,
            cols,
            totals,
        }
    }

    fn ordered(&self, a: usize, b: usize) -> usize {
        (a - 1) * self.len + b - 1
    }

    fn gather(data: &[f64], width: usize, rows: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            out.extend_from_slice(&data[r * width..(r + 1) * width]);
        }
        out
    }

    /// Estimates of `tr(C_ac C_db)` for each requested `(a, b)` row against all
    /// ordered `(c, d)`; row-major `rows.len() x len^2`.
    fn bilinear_rows(&self, ordered_rows: &[usize]) -> Vec<f64> {
        let (n, m, cols_all) = (self.n, ordered_rows.len(), self.len * self.len);
        let npairs = n * (n - 1);
        let xb = Self::gather(&self.x, npairs, ordered_rows);
        let rb = Self::gather(&self.rows, n, ordered_rows);
        let cb = Self::gather(&self.cols, n, ordered_rows);
        let s2 = gemm_abt(m, npairs, cols_all, &xb, &self.x);
        let cc = gemm_abt(m, n, cols_all, &cb, &self.cols);
        let rr = gemm_abt(m, n, cols_all, &rb, &self.rows);
        let cr = gemm_abt(m, n, cols_all, &cb, &self.rows);
        let rc = gemm_abt(m, n, cols_all, &rb, &self.cols);
        let (p2, p3, p4) = (
            falling_factorial(n, 2),
            falling_factorial(n, 3),
            falling_factorial(n, 4),
        );
        let len = self.len;
        let mut out = vec![0.0; m * cols_all];
        for (k, &row) in ordered_rows.iter().enumerate() {
            let base = k * cols_all;
            let s_ab = self.totals[row];
            for c in 1..=len {
                for d in 1..=len {
                    let col = (c - 1) * len + d - 1;
                    let swapped = (d - 1) * len + c - 1;
                    let e = base + col;
                    let s2v = s2[e];
                    let s3a = cc[e] - s2v;
                    let s3b = rr[e] - s2v;
                    let s4 = s_ab * self.totals[col] - s2v + s2[base + swapped]
                        - s3a
                        - s3b
                        - cr[e]
                        - rc[e];
                    out[e] = s2v / p2 - (s3a + s3b) / p3 + s4 / p4;
                }
            }
        }
        out
    }
}

/// Everything the fast route needs to produce the distance process and any
/// entry of its covariance matrix for one window.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    lo: usize,
    len: usize,
    n: usize,
    pairs_len: usize,
    /// `tr(Sigma_a Sigma_b)` estimates for `a <= b`, in upper-pair order.
    trace_products: Vec<f64>,
    /// `z[(a,b)][q-1] = sum_{c,d} W_q(c,d) tr^2(C_ac C_db)` for `a <= b`.
    z: Vec<f64>,
}

impl WindowKernel {
    pub fn new(w: &SegmentWindow<'_>) -> Result<Self> {
        let (n, len) = (w.n(), w.len());
        if n < 4 {
            return Err(Error::InvalidInput(format!(
                "the trace estimator needs n >= 4 subjects (got {n})"
            )));
        }
        let table = PairTable::build(w);
        let upper = UpperPairs::new(len);
        let pairs: Vec<(usize, usize)> = upper.pairs().collect();
        let blocks: Vec<&[(usize, usize)]> = pairs.chunks(block_rows(n)).collect();
        let q_count = len - 1;

        let results: Vec<(Vec<f64>, Vec<f64>)> = blocks
            .par_iter()
            .map(|block| {
                let ordered: Vec<usize> = block.iter().map(|&(a, b)| table.ordered(a, b)).collect();
                let phi = table.bilinear_rows(&ordered);
                let width = len * len;
                let mut z = Vec::with_capacity(block.len() * q_count);
                let mut diag = Vec::with_capacity(block.len());
                for (k, &(a, b)) in block.iter().enumerate() {
                    let row = &phi[k * width..(k + 1) * width];
                    diag.push(row[table.ordered(a, b)]);
                    let sq = |c: usize, d: usize| {
                        let v = row[(c - 1) * len + d - 1];
                        v * v
                    };
                    let dvals: Vec<f64> = (1..=len).map(|c| sq(c, c)).collect();
                    z.extend(weighted_contraction(len, &dvals, |c, d| {
                        sq(c, d) + sq(d, c)
                    }));
                }
                (z, diag)
            })
            .collect();

        let mut z = Vec::with_capacity(upper.count() * q_count);
        let mut trace_products = Vec::with_capacity(upper.count());
        for (zb, db) in results {
            z.extend(zb);
            trace_products.extend(db);
        }
        Ok(Self {
            lo: w.lo(),
            len,
            n,
            pairs_len: upper.count(),
            trace_products,
            z,
        })
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    fn upper(&self) -> UpperPairs {
        UpperPairs::new(self.len)
    }

    /// Unbiased `tr(Sigma_a Sigma_b)` (window-relative, 1-based, any order).
    pub fn trace_product(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.trace_products[self.upper().index(a, b)]
    }

    /// Unbiased `tr{(Sigma_s1 - Sigma_s2)^2}`.
    pub fn trace_distance(&self, s1: usize, s2: usize) -> f64 {
        self.trace_product(s1, s1) + self.trace_product(s2, s2) - 2.0 * self.trace_product(s1, s2)
    }

    /// `D_t` estimates for `t = 1..len-1`.
    pub fn dhat(&self) -> Vec<f64> {
        let upper = self.upper();
        let diag: Vec<f64> = (1..=self.len)
            .map(|a| self.trace_products[upper.index(a, a)])
            .collect();
        weighted_contraction(self.len, &diag, |a, b| {
            2.0 * self.trace_products[upper.index(a, b)]
        })
        .into_iter()
        .enumerate()
        .map(|(k, s)| s / pair_count(self.len, k + 1))
        .collect()
    }

    fn scale(&self) -> f64 {
        4.0 / falling_factorial(self.n, 2)
    }

    /// Column `q` of the covariance matrix of `(D_1, ..., D_{len-1})`.
    fn covariance_column(&self, q: usize, upper: &UpperPairs) -> Vec<f64> {
        let qc = self.len - 1;
        let zq = |a: usize, b: usize| self.z[upper.index(a, b) * qc + q - 1];
        let diag: Vec<f64> = (1..=self.len).map(|a| zq(a, a)).collect();
        let wq = pair_count(self.len, q);
        weighted_contraction(self.len, &diag, |a, b| 2.0 * zq(a, b))
            .into_iter()
            .enumerate()
            .map(|(k, v)| self.scale() * v / (pair_count(self.len, k + 1) * wq))
            .collect()
    }

    /// Full `(len-1) x (len-1)` covariance of the estimated process. Entries
    /// `(t, q)` with `t <= q` come from column `q`; the rest are mirrored.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.len - 1;
        let upper = self.upper();
        let columns: Vec<Vec<f64>> = (1..=m)
            .into_par_iter()
            .map(|q| self.covariance_column(q, &upper))
            .collect();
        DMatrix::from_fn(m, m, |r, c| {
            let (t, q) = if r <= c { (r, c) } else { (c, r) };
            columns[q][t]
        })
    }

    /// Diagonal of [`Self::covariance_matrix`], bit-identical to it.
    pub fn variances(&self) -> Vec<f64> {
        let upper = self.upper();
        (1..self.len)
            .map(|q| self.covariance_column(q, &upper)[q - 1])
            .collect()
    }

    pub fn process(&self) -> Result<DistanceProcess> {
        DistanceProcess::from_parts(self.lo, self.dhat(), &self.variances())
    }

    #[doc(hidden)]
    pub fn upper_pair_count(&self) -> usize {
        self.pairs_len
    }
}

/// `D_t` estimates via the fast route.
pub fn dhat_sequence(w: &SegmentWindow<'_>) -> Result<Vec<f64>> {
    Ok(WindowKernel::new(w)?.dhat())
}

/// Full distance process (estimate, standardizer, standardized path) via the fast route.
pub fn dhat_sequence_fast(w: &SegmentWindow<'_>) -> Result<DistanceProcess> {
    WindowKernel::new(w)?.process()
}
