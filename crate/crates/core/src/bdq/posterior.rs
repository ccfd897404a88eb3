//! Gaussian posterior of the signal given working measurements, and the
//! Type-II likelihood quantities built from the same `M×M` system.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::sensing::MeasurementOperator;

#[derive(Debug, Clone)]
pub struct Posterior {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Factor `λI + γΦPΦᵀ`. Returns the factor together with `ΦP`.
fn measurement_covariance(
    phi: &dyn MeasurementOperator,
    gamma: f64,
    p: &DMatrix<f64>,
    lambda: f64,
) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
    let phi_p = phi.left_mul(p);
    let mut cov = phi.right_mul_transpose(&phi_p) * gamma;
    let m = cov.nrows();
    for i in 0..m {
        cov[(i, i)] += lambda;
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let chol = cov.cholesky().ok_or_else(|| {
        Error::IllConditioned("λI + γΦPΦᵀ is not positive definite".into())
    })?;
    Ok((chol, phi_p))
}

fn check_dims(y: &DVector<f64>, phi: &dyn MeasurementOperator, p: &DMatrix<f64>) -> Result<()> {
    if y.len() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            found: y.len(),
        });
    }
    if p.nrows() != phi.ncols() || p.ncols() != phi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: phi.ncols(),
            found: p.nrows(),
        });
    }
    Ok(())
}

/// Posterior mean and covariance of `x` under prior `N(0, γP)` and noise
/// `N(0, λI)`:
///
/// ```text
/// μ = γPΦᵀ(λI + γΦPΦᵀ)⁻¹y
/// Σ = γP − γPΦᵀ(λI + γΦPΦᵀ)⁻¹ΦPγ
/// ```
///
/// Only the `M×M` measurement covariance is factored, so `P` may be singular.
pub fn posterior_update(
    y: &DVector<f64>,
    phi: &dyn MeasurementOperator,
    gamma: f64,
    p: &DMatrix<f64>,
    lambda: f64,
) -> Result<Posterior> {
    check_dims(y, phi, p)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("γ must be non-negative, got {gamma}")));
    }
    let n = phi.ncols();
    if gamma == 0.0 {
        return Ok(Posterior {
            mu: DVector::zeros(n),
            sigma: DMatrix::zeros(n, n),
        });
    }
    let (chol, phi_p) = measurement_covariance(phi, gamma, p, lambda)?;
    // γΦP, whose transpose is γPΦᵀ since P is symmetric.
    let gain_t = phi_p * gamma;
    let mu = gain_t.tr_mul(&chol.solve(y));
    let mut whitened = gain_t;
    if !chol.l_dirty().solve_lower_triangular_mut(&mut whitened) {
        return Err(Error::IllConditioned("singular Cholesky factor".into()));
    }
    let mut sigma = p * gamma - whitened.tr_mul(&whitened);
    symmetrize(&mut sigma);
    Ok(Posterior { mu, sigma })
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
}

/// `log|λI + γΦPΦᵀ| + yᵀ(λI + γΦPΦᵀ)⁻¹y`, the negative log marginal
/// likelihood up to constants.
pub fn negative_log_likelihood(
    y: &DVector<f64>,
    phi: &dyn MeasurementOperator,
    gamma: f64,
    p: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    check_dims(y, phi, p)?;
    let (chol, _) = measurement_covariance(phi, gamma, p, lambda)?;
    let l = chol.l_dirty();
    let log_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let mut w = y.clone();
    if !l.solve_lower_triangular_mut(&mut w) {
        return Err(Error::IllConditioned("singular Cholesky factor".into()));
    }
    Ok(log_det + w.norm_squared())
}

/// Noise variance update `(‖y − Φμ‖² + Tr(ΣΦᵀΦ)) / M`. The recovery loop
/// keeps λ fixed by default; this is exposed for callers who want to learn it.
pub fn update_lambda(
    y: &DVector<f64>,
    phi: &dyn MeasurementOperator,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    check_dims(y, phi, sigma)?;
    let fit = phi.apply(mu.as_slice());
    let residual: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
    let projected = phi.right_mul_transpose(&phi.left_mul(sigma));
    Ok((residual + projected.trace()) / phi.nrows() as f64)
}
