//! Sparse binary sensing matrices, the compression step `y = Φx`, and
//! compression-ratio accounting.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of ones placed in every column.
pub const ONES_PER_COLUMN: usize = 2;
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;
const RANK_PIVOT_TOL: f64 = 1e-10;

/// A linear measurement operator `Φ: R^N -> R^M`.
///
/// The recovery code only needs products with `Φ` from either side, so a
/// sparse operator never has to be materialized.
pub trait MeasurementOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `Φx`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `Φ·A` for an `N×K` matrix `A`.
    fn left_mul(&self, a: &DMatrix<f64>) -> DMatrix<f64>;

    /// `A·Φᵀ` for a `K×N` matrix `A`.
    fn right_mul_transpose(&self, a: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64> {
        self.left_mul(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

impl MeasurementOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn left_mul(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self * a
    }

    fn right_mul_transpose(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a * self.transpose()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// An `M×N` 0/1 matrix with exactly two ones per column, stored as the row
/// indices of those ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    supports: Vec<[usize; ONES_PER_COLUMN]>,
    seed: u64,
}

impl SparseBinaryMatrix {
    /// Draw a full row-rank matrix. Each column's rows are sampled uniformly
    /// without replacement; rank-deficient draws are discarded and the
    /// generator stream continues, up to [`MAX_GENERATION_ATTEMPTS`].
    pub fn generate(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows < ONES_PER_COLUMN {
            return Err(Error::InvalidConfig(format!(
                "need at least {ONES_PER_COLUMN} rows, got {rows}"
            )));
        }
        if rows > cols {
            return Err(Error::InvalidConfig(format!(
                "rows ({rows}) must not exceed columns ({cols})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            let supports = (0..cols)
                .map(|_| {
                    let picked = sample(&mut rng, rows, ONES_PER_COLUMN);
                    let (a, b) = (picked.index(0), picked.index(1));
                    [a.min(b), a.max(b)]
                })
                .collect();
            let m = Self {
                rows,
                cols,
                supports,
                seed,
            };
            if m.rank() == rows {
                return Ok(m);
            }
        }
        Err(Error::GenerationFailure {
            rows,
            cols,
            attempts: MAX_GENERATION_ATTEMPTS,
        })
    }

    /// Build from explicit column supports. Used for tests and for callers
    /// who fix the matrix by other means; no rank check is performed.
    pub fn from_supports(rows: usize, supports: Vec<[usize; ONES_PER_COLUMN]>) -> Result<Self> {
        for (j, s) in supports.iter().enumerate() {
            if s[0] == s[1] || s[0] >= rows || s[1] >= rows {
                return Err(Error::InvalidParameter(format!(
                    "column {j} has invalid support {s:?}"
                )));
            }
        }
        Ok(Self {
            rows,
            cols: supports.len(),
            supports,
            seed: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn column_supports(&self) -> &[[usize; ONES_PER_COLUMN]] {
        &self.supports
    }

    /// Row rank by Gaussian elimination with partial pivoting on a dense copy.
    pub fn rank(&self) -> usize {
        let mut a = MeasurementOperator::to_dense(self);
        let (m, n) = a.shape();
        let mut rank = 0;
        for col in 0..n {
            if rank == m {
                break;
            }
            let (pivot, best) = (rank..m)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((rank, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= RANK_PIVOT_TOL {
                continue;
            }
            a.swap_rows(rank, pivot);
            for r in rank + 1..m {
                let f = a[(r, col)] / a[(rank, col)];
                if f != 0.0 {
                    for c in col..n {
                        a[(r, c)] -= f * a[(rank, c)];
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

impl MeasurementOperator for SparseBinaryMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (s, &xj) in self.supports.iter().zip(x) {
            for &r in s {
                y[r] += xj;
            }
        }
        y
    }

    fn left_mul(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.cols, "left_mul: inner dimension");
        let mut out = DMatrix::zeros(self.rows, a.ncols());
        for (j, s) in self.supports.iter().enumerate() {
            for &r in s {
                for k in 0..a.ncols() {
                    out[(r, k)] += a[(j, k)];
                }
            }
        }
        out
    }

    fn right_mul_transpose(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.ncols(), self.cols, "right_mul_transpose: inner dimension");
        let mut out = DMatrix::zeros(a.nrows(), self.rows);
        for (j, s) in self.supports.iter().enumerate() {
            let src = a.column(j);
            for &r in s {
                let mut dst = out.column_mut(r);
                dst += &src;
            }
        }
        out
    }
}

/// `y = Φx`.
pub fn compress(phi: &dyn MeasurementOperator, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != phi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: phi.ncols(),
            found: x.len(),
        });
    }
    Ok(phi.apply(x))
}

/// `CR = (N − M) / N`.
pub fn compression_ratio(m: usize, n: usize) -> f64 {
    (n as f64 - m as f64) / n as f64
}

/// `CR_b = 1 − (1 − CR)·B/B_i`, the fraction of input bits removed.
pub fn bit_compression_ratio(m: usize, n: usize, bits: u8, input_bits: u8) -> f64 {
    1.0 - (1.0 - compression_ratio(m, n)) * f64::from(bits) / f64::from(input_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn generated_matrix_structure() {
        let phi = SparseBinaryMatrix::generate(64, 128, 7).unwrap();
        let dense = MeasurementOperator::to_dense(&phi);
        for j in 0..128 {
            assert_eq!(dense.column(j).sum(), 2.0);
            assert!(dense.column(j).iter().all(|&v| v == 0.0 || v == 1.0));
        }
        assert_eq!(phi.rank(), 64);
        assert_eq!(dense.rank(1e-9), 64);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SparseBinaryMatrix::generate(32, 128, 99).unwrap();
        let b = SparseBinaryMatrix::generate(32, 128, 99).unwrap();
        let c = SparseBinaryMatrix::generate(32, 128, 100).unwrap();
        assert_eq!(a.column_supports(), b.column_supports());
        assert_ne!(a.column_supports(), c.column_supports());
    }

    #[test]
    fn exhausted_support_space_fails() {
        assert!(matches!(
            SparseBinaryMatrix::generate(2, 2, 3),
            Err(Error::GenerationFailure { attempts: 1000, .. })
        ));
        assert!(matches!(SparseBinaryMatrix::generate(1, 4, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(SparseBinaryMatrix::generate(8, 4, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn compress_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let phi = SparseBinaryMatrix::generate(40, 100, seed).unwrap();
            let x: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sparse = compress(&phi, &x).unwrap();
            let dense = MeasurementOperator::to_dense(&phi) * nalgebra::DVector::from_vec(x);
            for (a, b) in sparse.iter().zip(dense.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sparse_products_match_dense() {
        let phi = SparseBinaryMatrix::generate(12, 30, 1).unwrap();
        let dense = MeasurementOperator::to_dense(&phi);
        let a = DMatrix::from_fn(30, 7, |i, j| ((i * 7 + j) as f64).sin());
        let b = DMatrix::from_fn(5, 30, |i, j| ((i + 3 * j) as f64).cos());
        assert!((phi.left_mul(&a) - &dense * &a).amax() < 1e-12);
        assert!((phi.right_mul_transpose(&b) - &b * dense.transpose()).amax() < 1e-12);
    }

    #[test]
    fn compress_errors_and_zero() {
        let phi = SparseBinaryMatrix::generate(4, 8, 0).unwrap();
        assert!(matches!(compress(&phi, &[0.0; 7]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(compress(&phi, &[0.0; 8]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn ratios() {
        assert_eq!(compression_ratio(64, 128), 0.5);
        assert!((bit_compression_ratio(64, 128, 2, 12) - 0.916_667).abs() < 1e-6);
        assert_eq!(compression_ratio(128, 128), 0.0);
        assert_eq!(bit_compression_ratio(128, 128, 12, 12), 0.0);
        assert_eq!(compression_ratio(96, 128), 0.25);
        assert!((bit_compression_ratio(96, 128, 4, 12) - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn compress_is_linear(seed in 0u64..50, a in -3.0f64..3.0,
                              x1 in proptest::collection::vec(-1.0f64..1.0, 24),
                              x2 in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let phi = SparseBinaryMatrix::generate(10, 24, seed).unwrap();
            let sum: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p + q).collect();
            let scaled: Vec<f64> = x1.iter().map(|p| a * p).collect();
            let y1 = compress(&phi, &x1).unwrap();
            let y2 = compress(&phi, &x2).unwrap();
            for ((s, p), q) in compress(&phi, &sum).unwrap().iter().zip(&y1).zip(&y2) {
                prop_assert!((s - p - q).abs() <= 1e-12);
            }
            for (s, p) in compress(&phi, &scaled).unwrap().iter().zip(&y1) {
                prop_assert!((s - a * p).abs() <= 1e-12);
            }
        }
    }
}
