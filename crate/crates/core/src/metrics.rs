//! Reconstruction quality and heart-rate error statistics.

use serde::Serialize;

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn snr_ratio(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    same_len(x, x_hat)?;
    let signal: f64 = x.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::UndefinedMetric("RSNR of an all-zero reference".into()));
    }
    let error: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(if error == 0.0 { f64::INFINITY } else { signal / error })
}

/// Reconstruction SNR in dB, `10·log10(‖x‖² / ‖x̂ − x‖²)`. A perfect
/// reconstruction yields `+∞`.
pub fn rsnr(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    snr_ratio(x, x_hat).map(|r| 10.0 * r.log10())
}

/// Average RSNR: `10·log10` of the mean *linear* SNR over segments.
///
/// Segments reconstructed exactly (infinite SNR) are left out of the mean
/// with a warning; if every segment is exact the result is `+∞`.
pub fn arsnr<'a, I>(segments: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut total = 0.0;
    let mut finite = 0usize;
    let mut exact = 0usize;
    for (x, x_hat) in segments {
        let r = snr_ratio(x, x_hat)?;
        if r.is_infinite() {
            exact += 1;
        } else {
            total += r;
            finite += 1;
        }
    }
    if finite + exact == 0 {
        return Err(Error::UndefinedMetric("ARSNR of zero segments".into()));
    }
    if exact > 0 {
        log::warn!("{exact} segment(s) reconstructed exactly; excluded from ARSNR");
    }
    if finite == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (total / finite as f64).log10())
}

/// Mean local SSIM over length-8 windows at stride 1.
///
/// The dynamic range is the larger of the two inputs' ranges, which keeps the
/// index symmetric and equal to the reference range when the two agree.
pub fn ssim_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    if x.len() < SSIM_WINDOW {
        return Err(Error::TooShort {
            needed: SSIM_WINDOW,
            available: x.len(),
        });
    }
    let range = |s: &[f64]| {
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    let rx = range(x);
    if rx == 0.0 {
        return Err(Error::UndefinedMetric("SSIM of a constant reference".into()));
    }
    let dynamic = rx.max(range(y));
    let c1 = (SSIM_K1 * dynamic).powi(2);
    let c2 = (SSIM_K2 * dynamic).powi(2);
    let w = SSIM_WINDOW as f64;
    let windows = x.len() - SSIM_WINDOW + 1;
    let total: f64 = x
        .windows(SSIM_WINDOW)
        .zip(y.windows(SSIM_WINDOW))
        .map(|(a, b)| {
            let ma = a.iter().sum::<f64>() / w;
            let mb = b.iter().sum::<f64>() / w;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for (p, q) in a.iter().zip(b) {
                va += (p - ma).powi(2);
                vb += (q - mb).powi(2);
                cov += (p - ma) * (q - mb);
            }
            va /= w;
            vb /= w;
            cov /= w;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / windows as f64)
}

fn paired_errors<'a>(est: &'a [f64], truth: &'a [f64]) -> Result<impl Iterator<Item = f64> + 'a> {
    same_len(est, truth)?;
    if est.is_empty() {
        return Err(Error::UndefinedMetric("no heart-rate windows".into()));
    }
    Ok(est.iter().zip(truth).map(|(a, b)| a - b))
}

/// Mean absolute BPM error.
pub fn error1(est: &[f64], truth: &[f64]) -> Result<f64> {
    let n = est.len() as f64;
    Ok(paired_errors(est, truth)?.map(f64::abs).sum::<f64>() / n)
}

/// Root-mean-square BPM error.
pub fn sd_bpm(est: &[f64], truth: &[f64]) -> Result<f64> {
    let n = est.len() as f64;
    Ok((paired_errors(est, truth)?.map(|e| e * e).sum::<f64>() / n).sqrt())
}

fn centered_moments(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    same_len(a, b)?;
    if a.len() < 2 {
        return Err(Error::UndefinedMetric("need at least two points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        saa += (p - ma).powi(2);
        sbb += (q - mb).powi(2);
        sab += (p - ma) * (q - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedMetric("constant input".into()));
    }
    Ok((ma, mb, saa, sbb, sab))
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let (_, _, saa, sbb, sab) = centered_moments(a, b)?;
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit `b ≈ slope·a + intercept`.
pub fn linear_fit(a: &[f64], b: &[f64]) -> Result<LinearFit> {
    let (ma, mb, saa, sbb, sab) = centered_moments(a, b)?;
    let slope = sab / saa;
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    Ok(LinearFit {
        slope,
        intercept: mb - slope * ma,
        r_squared: r * r,
    })
}

/// Per-segment reconstruction quality.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub rsnr_db: Vec<f64>,
    pub ssim: Vec<f64>,
    pub arsnr_db: f64,
    pub segments: usize,
}

impl RecoveryReport {
    pub fn from_segments(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let rsnr_db = pairs.iter().map(|(x, h)| rsnr(x, h)).collect::<Result<Vec<_>>>()?;
        let ssim = pairs.iter().map(|(x, h)| ssim_1d(x, h)).collect::<Result<Vec<_>>>()?;
        let arsnr_db = arsnr(pairs.iter().map(|(x, h)| (x.as_slice(), h.as_slice())))?;
        Ok(Self {
            rsnr_db,
            ssim,
            arsnr_db,
            segments: pairs.len(),
        })
    }

    pub fn mean_ssim(&self) -> f64 {
        self.ssim.iter().sum::<f64>() / self.ssim.len().max(1) as f64
    }

    /// Flat `key=value` lines.
    pub fn to_record(&self) -> String {
        format!(
            "segments={}\narsnr_db={}\nmean_ssim={}\n",
            self.segments,
            self.arsnr_db,
            self.mean_ssim()
        )
    }
}

/// Heart-rate tracking quality over paired windows.
#[derive(Debug, Clone, Serialize)]
pub struct HrReport {
    pub error1: f64,
    pub sd_bpm: f64,
    pub pearson: f64,
    pub fit: LinearFit,
    pub windows: usize,
}

impl HrReport {
    pub fn new(est: &[f64], truth: &[f64]) -> Result<Self> {
        Ok(Self {
            error1: error1(est, truth)?,
            sd_bpm: sd_bpm(est, truth)?,
            pearson: pearson(truth, est)?,
            fit: linear_fit(truth, est)?,
            windows: est.len(),
        })
    }

    pub fn to_record(&self) -> String {
        format!(
            "windows={}\nerror1={}\nsd_bpm={}\npearson={}\nslope={}\nintercept={}\nr_squared={}\n",
            self.windows,
            self.error1,
            self.sd_bpm,
            self.pearson,
            self.fit.slope,
            self.fit.intercept,
            self.fit.r_squared
        )
    }
}
