// SPDX-License-Identifier: MIT OR Apache-2.0

//! Four-subject U-statistic for traces of covariance products.
//!
//! For time indices `a, b, c, d` let `M_ij = Y_ia' Y_jb` and
//! `N_kl = Y_kc' Y_ld`. Then
//!
//! ```text
//! Phi = S2/P(n,2) - S3a/P(n,3) - S3b/P(n,3) + S4/P(n,4)
//! S2  = sum_{i != j}            M_ij N_ij
//! S3a = sum_{i, j, k distinct}  M_ij N_kj
//! S3b = sum_{i, j, k distinct}  M_ij N_ik
//! S4  = sum_{i, j, k, l distinct} M_ij N_kl
//! ```
//!
//! is unbiased for `tr(C_ac C_db)` whatever the means `mu_t` are; the three-
//! and four-subject sums cancel every mean term. `P(n,k)` counts ordered
//! tuples. With `(c, d) = (a, b)` this estimates `tr(Sigma_a Sigma_b)`.

use crate::data::SegmentWindow;
use crate::numeric::{falling_factorial, CompensatedSum};

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Raw tuple sums `(S2, S3a, S3b, S4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TupleSums {
    pub s2: f64,
    pub s3a: f64,
    pub s3b: f64,
    pub s4: f64,
}

impl TupleSums {
    pub fn combine(&self, n: usize) -> f64 {
        self.s2 / falling_factorial(n, 2) - (self.s3a + self.s3b) / falling_factorial(n, 3)
            + self.s4 / falling_factorial(n, 4)
    }
}

/// Literal enumeration over ordered tuples of distinct subjects, `O(p n^4)`.
/// Time indices are window-relative and 1-based. Requires `n >= 4`.
pub fn tuple_sums_naive(
    w: &SegmentWindow<'_>,
    a: usize,
    b: usize,
    c: usize,
    d: usize,
) -> TupleSums {
    let n = w.n();
    let m = |i: usize, j: usize| dot(w.observation(i, a), w.observation(j, b));
    let nn = |k: usize, l: usize| dot(w.observation(k, c), w.observation(l, d));
    let (mut s2, mut s3a, mut s3b, mut s4) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let mij = m(i, j);
            s2.add(mij * nn(i, j));
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                s3a.add(mij * nn(k, j));
                s3b.add(mij * nn(i, k));
                for l in 0..n {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    s4.add(mij * nn(k, l));
                }
            }
        }
    }
    TupleSums {
        s2: s2.value(),
        s3a: s3a.value(),
        s3b: s3b.value(),
        s4: s4.value(),
    }
}

/// Unbiased estimate of `tr(C_ac C_db)` by direct enumeration.
pub fn bilinear_naive(w: &SegmentWindow<'_>, a: usize, b: usize, c: usize, d: usize) -> f64 {
    tuple_sums_naive(w, a, b, c, d).combine(w.n())
}

/// All subject-by-time inner products `Y_ia' Y_jb` of a window, computed
/// once so that repeated tuple enumerations cost `O(n^4)` instead of `O(p n^4)`.
#[derive(Debug, Clone)]
pub struct InnerProducts {
    n: usize,
    len: usize,
    /// `[((a-1) n + i) * (len n) + (b-1) n + j]`
    values: Vec<f64>,
    tuples: Option<DistinctTuples>,
}

/// Ordered tuples of distinct subjects, listed once for small `n`.
#[derive(Debug, Clone)]
struct DistinctTuples {
    pairs: Vec<[usize; 2]>,
    triples: Vec<[usize; 3]>,
    quads: Vec<[usize; 4]>,
}

/// Largest `n` for which tuples are listed rather than looped over.
const LISTED_TUPLES_MAX_N: usize = 12;

impl DistinctTuples {
    fn new(n: usize) -> Self {
        let mut t = Self {
            pairs: Vec::new(),
            triples: Vec::new(),
            quads: Vec::new(),
        };
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                t.pairs.push([i, j]);
                for k in (0..n).filter(|&k| k != i && k != j) {
                    t.triples.push([i, j, k]);
                    for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                        t.quads.push([i, j, k, l]);
                    }
                }
            }
        }
        t
    }
}

impl InnerProducts {
    pub fn new(w: &SegmentWindow<'_>) -> Self {
        let (n, len) = (w.n(), w.len());
        let side = n * len;
        let mut values = vec![0.0; side * side];
        for a in 1..=len {
            for i in 0..n {
                let row = ((a - 1) * n + i) * side;
                for b in 1..=len {
                    for j in 0..n {
                        values[row + (b - 1) * n + j] =
                            dot(w.observation(i, a), w.observation(j, b));
                    }
                }
            }
        }
        let tuples = (n <= LISTED_TUPLES_MAX_N).then(|| DistinctTuples::new(n));
        Self {
            n,
            len,
            values,
            tuples,
        }
    }

    #[inline]
    fn block(&self, a: usize, b: usize) -> impl Fn(usize, usize) -> f64 + '_ {
        let side = self.n * self.len;
        let base = (a - 1) * self.n * side + (b - 1) * self.n;
        move |i, j| self.values[base + i * side + j]
    }

    /// Same enumeration as [`tuple_sums_naive`], reading cached products
    /// and accumulating in plain `f64`.
    pub fn tuple_sums(&self, a: usize, b: usize, c: usize, d: usize) -> TupleSums {
        let n = self.n;
        let m = self.block(a, b);
        let nn = self.block(c, d);
        if let Some(t) = &self.tuples {
            return TupleSums {
                s2: t.pairs.iter().map(|&[i, j]| m(i, j) * nn(i, j)).sum(),
                s3a: t.triples.iter().map(|&[i, j, k]| m(i, j) * nn(k, j)).sum(),
                s3b: t.triples.iter().map(|&[i, j, k]| m(i, j) * nn(i, k)).sum(),
                s4: t.quads.iter().map(|&[i, j, k, l]| m(i, j) * nn(k, l)).sum(),
            };
        }
        let (mut s2, mut s3a, mut s3b, mut s4) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let mij = m(i, j);
                s2 += mij * nn(i, j);
                let (mut t3a, mut t3b, mut t4) = (0.0, 0.0, 0.0);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    t3a += nn(k, j);
                    t3b += nn(i, k);
                    for l in 0..n {
                        if l != i && l != j && l != k {
                            t4 += nn(k, l);
                        }
                    }
                }
                s3a += mij * t3a;
                s3b += mij * t3b;
                s4 += mij * t4;
            }
        }
        TupleSums { s2, s3a, s3b, s4 }
    }

    pub fn bilinear(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.tuple_sums(a, b, c, d).combine(self.n)
    }
}

/// The same sums from two `n x n` matrices in `O(n^2)`, via inclusion-exclusion
/// over coinciding subject indices. Matrices are row-major.
pub fn tuple_sums_from_matrices(n: usize, m: &[f64], nm: &[f64]) -> TupleSums {
    let at = |x: &[f64], i: usize, j: usize| x[i * n + j];
    let mut s2 = 0.0;
    let mut cross = 0.0; // sum_{i != j} M_ij N_ji
    let (mut rm, mut cm, mut rn, mut cn) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (x, y) = (at(m, i, j), at(nm, i, j));
            s2 += x * y;
            cross += x * at(nm, j, i);
            rm[i] += x;
            cm[j] += x;
            rn[i] += y;
            cn[j] += y;
        }
    }
    let dotv = |u: &[f64], v: &[f64]| -> f64 { dot(u, v) };
    let (sm, sn): (f64, f64) = (rm.iter().sum(), rn.iter().sum());
    let s3a = dotv(&cm, &cn) - s2;
    let s3b = dotv(&rm, &rn) - s2;
    let s4 = sm * sn - s2 + cross - s3a - s3b - dotv(&cm, &rn) - dotv(&rm, &cn);
    TupleSums { s2, s3a, s3b, s4 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FunctionalSample;
    use rand::{Rng, SeedableRng};

    fn random_sample(n: usize, t: usize, p: usize, seed: u64, shift: f64) -> FunctionalSample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * t * p)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0 + shift)
            .collect();
        FunctionalSample::new(n, t, p, values).unwrap()
    }

    #[test]
    fn matrix_route_matches_enumeration() {
        for seed in 0..20 {
            let s = random_sample(4 + (seed as usize % 4), 3, 2, seed, 0.3);
            let w = s.full_window();
            let n = s.n();
            let gram = |a: usize, b: usize| -> Vec<f64> {
                let mut g = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        g[i * n + j] = dot(w.observation(i, a), w.observation(j, b));
                    }
                }
                g
            };
            for (a, b, c, d) in [(1, 2, 3, 1), (2, 2, 2, 2), (1, 3, 1, 3), (3, 1, 2, 2)] {
                let naive = tuple_sums_naive(&w, a, b, c, d);
                let fast = tuple_sums_from_matrices(n, &gram(a, b), &gram(c, d));
                for (x, y) in [
                    (naive.s2, fast.s2),
                    (naive.s3a, fast.s3a),
                    (naive.s3b, fast.s3b),
                    (naive.s4, fast.s4),
                ] {
                    assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn cached_products_match_enumeration() {
        for n in [6, 13] {
            let s = random_sample(n, 4, 3, 5, 0.2);
            let w = s.full_window();
            let ip = InnerProducts::new(&w);
            assert_eq!(ip.tuples.is_some(), n <= LISTED_TUPLES_MAX_N);
            for (a, b, c, d) in [(1, 2, 3, 4), (4, 4, 4, 4), (2, 1, 1, 2), (3, 4, 2, 1)] {
                let (x, y) = (ip.tuple_sums(a, b, c, d), tuple_sums_naive(&w, a, b, c, d));
                for (u, v) in [(x.s2, y.s2), (x.s3a, y.s3a), (x.s3b, y.s3b), (x.s4, y.s4)] {
                    assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()), "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn mean_shift_invariance() {
        // a per-time shift common to all subjects cancels exactly
        let s = random_sample(6, 3, 3, 11, 0.0);
        let shifted = FunctionalSample::new(
            6,
            3,
            3,
            s.values()
                .iter()
                .enumerate()
                .map(|(k, v)| v + [0.7, -1.3, 2.1][k % 3] * (1 + (k / 3) % 3) as f64)
                .collect(),
        )
        .unwrap();
        for (a, b, c, d) in [(1, 2, 1, 2), (1, 1, 1, 1), (2, 3, 1, 2)] {
            let x = bilinear_naive(&s.full_window(), a, b, c, d);
            let y = bilinear_naive(&shifted.full_window(), a, b, c, d);
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }
}
