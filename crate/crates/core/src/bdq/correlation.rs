//! Correlation-matrix learning and its AR(1)-style regularization through the
//! DCT-II basis.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Orthonormal DCT-II matrix: `C[k, n] = s_k·cos(π(2n+1)k / 2N)` with
/// `s_0 = √(1/N)` and `s_k = √(2/N)` otherwise. Rows are basis vectors in
/// increasing frequency.
pub fn dct_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, j| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

fn check_ar1(r: f64, n: usize) -> Result<()> {
    if !(r.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) coefficient must satisfy |r| < 1, got {r}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("AR(1) matrix needs N ≥ 2, got {n}")));
    }
    Ok(())
}

/// Toeplitz AR(1) correlation, entries `r^|i−j|`.
pub fn ar1_matrix(r: f64, n: usize) -> Result<DMatrix<f64>> {
    check_ar1(r, n)?;
    Ok(DMatrix::from_fn(n, n, |i, j| r.powi(i.abs_diff(j) as i32)))
}

/// Closed-form tridiagonal inverse of [`ar1_matrix`].
pub fn ar1_inverse(r: f64, n: usize) -> Result<DMatrix<f64>> {
    check_ar1(r, n)?;
    let scale = 1.0 / (1.0 - r * r);
    let mut inv = DMatrix::zeros(n, n);
    for i in 0..n {
        inv[(i, i)] = if i == 0 || i == n - 1 { 1.0 } else { 1.0 + r * r } * scale;
        if i + 1 < n {
            inv[(i, i + 1)] = -r * scale;
            inv[(i + 1, i)] = -r * scale;
        }
    }
    Ok(inv)
}

/// `P = (Σ + μμᵀ) / γ`.
pub fn update_correlation(mu: &DVector<f64>, sigma: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if gamma == 0.0 {
        return Err(Error::DegenerateGamma);
    }
    let mut p = second_moment(mu, sigma);
    p /= gamma;
    Ok(p)
}

/// `Σ + μμᵀ`, symmetrized.
pub(crate) fn second_moment(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = sigma + mu * mu.transpose();
    super::posterior::symmetrize(&mut s);
    s
}

/// A correlation matrix rebuilt on the DCT basis, with unit diagonal, and the
/// factors of its inverse.
///
/// `P̄ = V⁻¹·Cᵀ·diag(d)·C·V⁻¹` and `P̄⁻¹ = V·Cᵀ·diag(1/d)·C·V`, where
/// `V = diag(v)` rescales the diagonal to one.
#[derive(Debug, Clone)]
pub struct RegularizedCorrelation {
    pub p_bar: DMatrix<f64>,
    /// Floored eigenvalues, descending, paired with DCT rows in order.
    pub eigenvalues: DVector<f64>,
    /// Square roots of the diagonal before normalization.
    pub scale: DVector<f64>,
    basis: DMatrix<f64>,
}

impl RegularizedCorrelation {
    /// Dense `P̄⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.basis.nrows();
        let mut weighted = self.basis.clone();
        for k in 0..n {
            let inv_d = 1.0 / self.eigenvalues[k];
            weighted.row_mut(k).scale_mut(inv_d);
        }
        let mut inv = self.basis.tr_mul(&weighted);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] *= self.scale[i] * self.scale[j];
            }
        }
        inv
    }

    /// `Tr[P̄⁻¹·S]` without forming `P̄⁻¹`.
    pub fn trace_inverse_product(&self, s: &DMatrix<f64>) -> f64 {
        let n = s.nrows();
        let scaled = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * self.scale[i] * self.scale[j]);
        // diag(C·VSV·Cᵀ)_k = c_k · (VSV c_k)
        let projected = &self.basis * scaled;
        (0..n)
            .map(|k| projected.row(k).dot(&self.basis.row(k)) / self.eigenvalues[k])
            .sum()
    }
}

/// Replace the eigenvectors of `P` by the DCT-II basis, keeping its
/// eigenvalues (descending, floored at `eigen_floor·max`), and normalize the
/// result to unit diagonal.
pub fn regularize_correlation(
    p: &DMatrix<f64>,
    dct: &DMatrix<f64>,
    eigen_floor: f64,
) -> Result<RegularizedCorrelation> {
    let n = p.nrows();
    if dct.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: dct.nrows(),
        });
    }
    let mut d: Vec<f64> = p.clone().symmetric_eigenvalues().iter().copied().collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let largest = d[0];
    if !(largest > 0.0 && largest.is_finite()) {
        return Err(Error::RegularizationFailure(format!(
            "largest eigenvalue is {largest}"
        )));
    }
    let floor = eigen_floor * largest;
    for v in d.iter_mut() {
        *v = v.max(floor);
    }
    let eigenvalues = DVector::from_vec(d);

    let mut weighted = dct.clone();
    for k in 0..n {
        weighted.row_mut(k).scale_mut(eigenvalues[k]);
    }
    let mut p_tilde = dct.tr_mul(&weighted);
    super::posterior::symmetrize(&mut p_tilde);

    let diag = p_tilde.diagonal();
    if let Some(bad) = diag.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::RegularizationFailure(format!("non-positive diagonal entry {bad}")));
    }
    let scale = diag.map(f64::sqrt);
    let p_bar = DMatrix::from_fn(n, n, |i, j| p_tilde[(i, j)] / (scale[i] * scale[j]));
    Ok(RegularizedCorrelation {
        p_bar,
        eigenvalues,
        scale,
        basis: dct.clone(),
    })
}

/// `γ = Tr[P̄⁻¹(Σ + μμᵀ)] / N`.
pub fn update_gamma(mu: &DVector<f64>, sigma: &DMatrix<f64>, reg: &RegularizedCorrelation) -> f64 {
    let s = second_moment(mu, sigma);
    (reg.trace_inverse_product(&s) / mu.len() as f64).max(0.0)
}

/// Relative off-diagonal energy of `C·A·Cᵀ`: squared Frobenius norm off the
/// diagonal over the total. Zero when the DCT rows diagonalize `A`.
pub fn dct_off_diagonal_energy(a: &DMatrix<f64>) -> f64 {
    let c = dct_matrix(a.nrows());
    let g = &c * a * c.transpose();
    let total = g.norm_squared();
    let on: f64 = g.diagonal().iter().map(|x| x * x).sum();
    (total - on) / total
}
