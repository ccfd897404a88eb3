//! Bayesian de-quantization: recover a segment from underdetermined,
//! coarsely quantized measurements `z = Φx + e + n`.
//!
//! The signal prior is `x ~ N(0, γP)` with a learned correlation matrix `P`
//! that is pulled toward an AR(1)-like structure by swapping its eigenvectors
//! for the DCT-II basis. Quantization error `e` is uniform on one cell; the
//! outer E-step replaces it by its conditional mean, a truncated normal mean.
//!
//! One outer iteration runs:
//!
//! 1. posterior `μ, Σ` given working measurements `y`;
//! 2. `P = (Σ + μμᵀ)/γ`;
//! 3. regularize `P` to `P̄` on the DCT basis;
//! 4. `γ = Tr[P̄⁻¹(Σ + μμᵀ)]/N`;
//! 5. `ê = E[e | z, μ]`, then `y = z − ê`.

mod correlation;
mod posterior;
mod truncnorm;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensing::MeasurementOperator;

pub use correlation::{
    ar1_inverse, ar1_matrix, dct_matrix, dct_off_diagonal_energy, regularize_correlation,
    update_correlation, update_gamma, RegularizedCorrelation,
};
pub use posterior::{negative_log_likelihood, posterior_update, update_lambda, Posterior};
pub use truncnorm::{std_normal_cdf, std_normal_pdf, truncated_normal_mean};

#[derive(Debug, Clone, PartialEq)]
pub struct BdqOptions {
    /// Noise variance, held fixed as a regularizer.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once `‖μ_t − μ_{t−1}‖ / ‖μ_{t−1}‖` drops below this.
    pub tol: f64,
    /// Eigenvalue floor relative to the largest eigenvalue of `P`.
    pub eigen_floor: f64,
    pub saturation_aware: bool,
    /// Quantizer reference voltage; enables the one-sided error model on
    /// measurements that look saturated.
    pub v_ref: Option<f64>,
    /// Quantizer cell width `Δ`.
    pub delta: f64,
    pub init_gamma: f64,
}

impl Default for BdqOptions {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            max_iter: 128,
            tol: 1e-8,
            eigen_floor: 1e-8,
            saturation_aware: true,
            v_ref: None,
            delta: 0.0,
            init_gamma: 1.0,
        }
    }
}

impl BdqOptions {
    pub fn for_quantizer(v_ref: f64, delta: f64) -> Self {
        Self {
            v_ref: Some(v_ref),
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.eigen_floor > 0.0 && self.eigen_floor < 1.0) {
            return bad(format!("eigen_floor must be in (0, 1), got {}", self.eigen_floor));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be non-negative, got {}", self.delta));
        }
        if !(self.init_gamma > 0.0) {
            return bad(format!("init_gamma must be positive, got {}", self.init_gamma));
        }
        if let Some(v) = self.v_ref {
            if !(v > 0.0) {
                return bad(format!("v_ref must be positive, got {v}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-run record of the recovery loop.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Negative log marginal likelihood after each γ update.
    pub nll_trace: Vec<f64>,
    pub gamma_trace: Vec<f64>,
    pub final_gamma: f64,
    /// Measurements treated as saturated in the last outer E-step.
    pub saturated: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub x_hat: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Conditional mean of the quantization error, `E[e | z, μ]`.
///
/// With `μ_e = z − Φμ`, each entry is the mean of `N(μ_e, λ)` truncated to
/// `[−Δ/2, Δ/2]`. When `v_ref` is given, a measurement whose prediction
/// `(Φμ)_i` lies beyond a rail and whose quantized value sits in that rail's
/// cell may have been clipped: the bound on the far side of the rail is
/// dropped. For the top rail the true value is at least `v_ref − Δ`, so
/// `e ≤ Δ/2` is all that is known; the bottom rail mirrors this.
///
/// Returns the estimate and the number of measurements treated as saturated.
pub fn estimate_quantization_error(
    z: &[f64],
    prediction: &[f64],
    lambda: f64,
    delta: f64,
    v_ref: Option<f64>,
) -> Result<(Vec<f64>, usize)> {
    if z.len() != prediction.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: prediction.len(),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    let sd = lambda.sqrt();
    let half = 0.5 * delta;
    let mut saturated = 0;
    let e_hat = z
        .iter()
        .zip(prediction)
        .map(|(&zi, &pi)| {
            let mean = zi - pi;
            let (lower, upper) = match v_ref {
                Some(v) if pi > v && zi >= v - delta => (f64::NEG_INFINITY, half),
                Some(v) if pi < -v && zi <= -v + delta => (-half, f64::INFINITY),
                _ => (-half, half),
            };
            if lower.is_infinite() || upper.is_infinite() {
                saturated += 1;
            }
            truncated_normal_mean(mean, sd, lower, upper)
        })
        .collect();
    Ok((e_hat, saturated))
}

/// All latent quantities of the nested EM loop.
#[derive(Debug, Clone)]
pub struct BdqState {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub gamma: f64,
    /// Correlation used by the next posterior update.
    pub p: DMatrix<f64>,
    pub lambda: f64,
    pub e_hat: DVector<f64>,
    pub y_work: DVector<f64>,
    pub saturated: usize,
    z: DVector<f64>,
    dct: DMatrix<f64>,
}

impl BdqState {
    pub fn new(z: &[f64], n: usize, opts: &BdqOptions) -> Self {
        let z = DVector::from_column_slice(z);
        Self {
            mu: DVector::zeros(n),
            sigma: DMatrix::zeros(n, n),
            gamma: opts.init_gamma,
            p: DMatrix::identity(n, n),
            lambda: opts.lambda,
            e_hat: DVector::zeros(z.len()),
            y_work: z.clone(),
            saturated: 0,
            z,
            dct: dct_matrix(n),
        }
    }

    /// One outer iteration. Returns the NLL evaluated at the new `γ, P̄`.
    pub fn step(
        &mut self,
        phi: &dyn MeasurementOperator,
        opts: &BdqOptions,
        estimate_error: bool,
    ) -> Result<f64> {
        let post = posterior_update(&self.y_work, phi, self.gamma, &self.p, self.lambda)?;
        let p = update_correlation(&post.mu, &post.sigma, self.gamma)?;
        let reg = regularize_correlation(&p, &self.dct, opts.eigen_floor)?;
        self.gamma = update_gamma(&post.mu, &post.sigma, &reg);
        self.p = reg.p_bar;
        self.mu = post.mu;
        self.sigma = post.sigma;
        let nll = negative_log_likelihood(&self.y_work, phi, self.gamma, &self.p, self.lambda)?;

        if estimate_error {
            let prediction = phi.apply(self.mu.as_slice());
            let v_ref = if opts.saturation_aware { opts.v_ref } else { None };
            let (e_hat, saturated) = estimate_quantization_error(
                self.z.as_slice(),
                &prediction,
                self.lambda,
                opts.delta,
                v_ref,
            )?;
            self.e_hat = DVector::from_vec(e_hat);
            self.saturated = saturated;
            self.y_work = &self.z - &self.e_hat;
        }
        Ok(nll)
    }
}

fn run(
    z: &[f64],
    phi: &dyn MeasurementOperator,
    opts: &BdqOptions,
    estimate_error: bool,
) -> Result<Recovery> {
    opts.validate()?;
    if z.len() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            found: z.len(),
        });
    }
    let start = Instant::now();
    let mut state = BdqState::new(z, phi.ncols(), opts);
    let mut diag = Diagnostics::default();
    for _ in 0..opts.max_iter {
        let previous = state.mu.clone();
        let nll = state.step(phi, opts, estimate_error)?;
        diag.iterations += 1;
        diag.nll_trace.push(nll);
        diag.gamma_trace.push(state.gamma);
        let change = (&state.mu - &previous).norm() / previous.norm().max(1e-12);
        if change < opts.tol {
            diag.converged = true;
            break;
        }
    }
    diag.final_gamma = state.gamma;
    diag.saturated = state.saturated;
    diag.wall_time_s = start.elapsed().as_secs_f64();
    Ok(Recovery {
        x_hat: state.mu.as_slice().to_vec(),
        e_hat: state.e_hat.as_slice().to_vec(),
        diagnostics: diag,
    })
}

/// Full BDQ recovery from mid-point measurements `z`.
pub fn recover(z: &[f64], phi: &dyn MeasurementOperator, opts: &BdqOptions) -> Result<Recovery> {
    run(z, phi, opts, true)
}

/// The same loop with the quantization error ignored (`ê ≡ 0`). Serves as
/// the quantization-blind baseline.
pub fn recover_blind(z: &[f64], phi: &dyn MeasurementOperator, opts: &BdqOptions) -> Result<Recovery> {
    run(z, phi, opts, false)
}

/// EM on `γ` alone with `P` held fixed. Returns the NLL before the first
/// update followed by the NLL after each update.
pub fn fixed_correlation_em(
    y: &[f64],
    phi: &dyn MeasurementOperator,
    p: &DMatrix<f64>,
    p_inv: &DMatrix<f64>,
    lambda: f64,
    init_gamma: f64,
    iterations: usize,
) -> Result<Vec<f64>> {
    let y = DVector::from_column_slice(y);
    let n = phi.ncols() as f64;
    let mut gamma = init_gamma;
    let mut trace = vec![negative_log_likelihood(&y, phi, gamma, p, lambda)?];
    for _ in 0..iterations {
        let post = posterior_update(&y, phi, gamma, p, lambda)?;
        let s = correlation::second_moment(&post.mu, &post.sigma);
        gamma = (p_inv * s).trace() / n;
        trace.push(negative_log_likelihood(&y, phi, gamma, p, lambda)?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::QuantizerConfig;
    use crate::sensing::SparseBinaryMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1_path(r: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity(n);
        let mut prev: f64 = rng.sample(StandardNormal);
        x.push(prev);
        for _ in 1..n {
            let w: f64 = rng.sample(StandardNormal);
            prev = r * prev + (1.0 - r * r).sqrt() * w;
            x.push(prev);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        let phi = SparseBinaryMatrix::generate(16, 32, 1).unwrap();
        let opts = BdqOptions::for_quantizer(1.0, 0.5);
        let rec = recover(&[0.0; 16], &phi, &opts).unwrap();
        assert!(rec.x_hat.iter().all(|&v| v == 0.0));
        assert!(rec.e_hat.iter().all(|&v| v == 0.0));
        let blind = recover_blind(&[0.0; 16], &phi, &opts).unwrap();
        assert!(blind.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovery_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ar1_path(0.9, 32, &mut rng);
        let phi = SparseBinaryMatrix::generate(16, 32, 4).unwrap();
        let y = phi.apply(&x);
        let opts = BdqOptions {
            max_iter: 20,
            ..BdqOptions::for_quantizer(0.3, 0.1)
        };
        let a = recover(&y, &phi, &opts).unwrap();
        let b = recover(&y, &phi, &opts).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
        assert_eq!(a.e_hat, b.e_hat);
        assert_eq!(a.diagnostics.nll_trace, b.diagnostics.nll_trace);
    }

    #[test]
    fn error_estimate_examples() {
        let (e, _) = estimate_quantization_error(&[0.5, -0.25], &[0.5, -0.25], 0.01, 0.5, None).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);

        // Measurements inside the window stay inside it.
        let z = [0.1, 0.3, -0.2, 0.0];
        let pred = [0.3, -0.4, 0.05, 1.2];
        let (e, sat) = estimate_quantization_error(&z, &pred, 1e-3, 0.2, None).unwrap();
        assert_eq!(sat, 0);
        assert!(e.iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn saturation_releases_the_far_bound() {
        let q = QuantizerConfig::new(1.0, 2).unwrap();
        let delta = q.cell_width();
        let top = q.value_of(3).unwrap();
        let bottom = q.value_of(0).unwrap();
        let inner = q.value_of(2).unwrap();
        // Prediction 1.4 beyond the top rail: the clipped measurement's error
        // can be far below −Δ/2.
        let (e, sat) =
            estimate_quantization_error(&[top, bottom, inner], &[1.4, -1.3, 1.4], 1e-3, delta, Some(1.0))
                .unwrap();
        assert_eq!(sat, 2);
        assert!((e[0] - (top - 1.4)).abs() < 1e-9);
        assert!((e[1] - (bottom + 1.3)).abs() < 1e-9);
        // Interior level: not a clipping candidate, bound kept.
        assert!((e[2] + delta / 2.0).abs() < 2e-3);

        let (e, sat) = estimate_quantization_error(&[top], &[1.4], 1e-3, delta, None).unwrap();
        assert_eq!(sat, 0);
        assert!(e[0] >= -delta / 2.0);
    }

    #[test]
    fn blind_and_aware_agree_without_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ar1_path(0.95, 64, &mut rng);
        let phi = SparseBinaryMatrix::generate(32, 64, 3).unwrap();
        let y = phi.apply(&x);
        let opts = BdqOptions {
            delta: 1e-12,
            v_ref: None,
            ..BdqOptions::default()
        };
        let a = recover(&y, &phi, &opts).unwrap();
        let b = recover_blind(&y, &phi, &opts).unwrap();
        let ra = crate::metrics::rsnr(&x, &a.x_hat).unwrap();
        let rb = crate::metrics::rsnr(&x, &b.x_hat).unwrap();
        assert!((ra - rb).abs() < 1e-6, "{ra} vs {rb}");
    }

    #[test]
    fn noiseless_identity_recovers_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = ar1_path(0.8, 32, &mut rng);
        let phi = DMatrix::<f64>::identity(32, 32);
        let opts = BdqOptions {
            lambda: 1e-8,
            delta: 1e-12,
            ..BdqOptions::default()
        };
        let rec = recover(&z, &phi, &opts).unwrap();
        let err: f64 = rec.x_hat.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn homogeneous_in_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = ar1_path(0.95, 64, &mut rng);
        let phi = SparseBinaryMatrix::generate(32, 64, 8).unwrap();
        let y = phi.apply(&x);
        let v_ref = 0.7 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let q = QuantizerConfig::new(v_ref, 3).unwrap();
        let z = crate::quantizer::dequantize_levels(&crate::quantizer::quantize_levels(&y, &q), &q).unwrap();
        let base = BdqOptions {
            max_iter: 40,
            ..BdqOptions::for_quantizer(v_ref, q.cell_width())
        };
        let rec = recover(&z, &phi, &base).unwrap();
        for a in [4.0, 0.5, 3.0] {
            let scaled = BdqOptions {
                lambda: base.lambda * a * a,
                init_gamma: base.init_gamma * a * a,
                v_ref: Some(v_ref * a),
                delta: base.delta * a,
                ..base.clone()
            };
            let za: Vec<f64> = z.iter().map(|v| v * a).collect();
            let ra = recover(&za, &phi, &scaled).unwrap();
            let norm = rec.x_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = rec
                .x_hat
                .iter()
                .zip(&ra.x_hat)
                .map(|(p, q)| (a * p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(diff / (a * norm) < 1e-6, "a={a}: {}", diff / (a * norm));
        }
    }

    #[test]
    fn fixed_correlation_em_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let phi = SparseBinaryMatrix::generate(16, 32, 5).unwrap();
        let r = 0.8;
        let p = ar1_matrix(r, 32).unwrap();
        let p_inv = ar1_inverse(r, 32).unwrap();
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace = fixed_correlation_em(&y, &phi, &p, &p_inv, 1e-2, 1.0, 30).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
    }

    #[test]
    fn options_validation() {
        assert!(BdqOptions::default().validate().is_ok());
        assert!(BdqOptions { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(BdqOptions { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(BdqOptions { eigen_floor: 1.0, ..Default::default() }.validate().is_err());
        assert!(BdqOptions { delta: -1.0, ..Default::default() }.validate().is_err());
    }
}
