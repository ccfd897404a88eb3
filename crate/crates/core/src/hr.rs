//! Sliding-window spectral-peak heart-rate estimation from PPG.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::metrics::HrReport;
use crate::signals::{interpolate_track, save_track, MAX_BPM, MIN_BPM};

pub const DEFAULT_WINDOW_S: f64 = 8.0;
pub const DEFAULT_STEP_S: f64 = 2.0;
const MIN_FFT_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct HrTrack {
    /// BPM per window; `None` for silent windows.
    pub estimates: Vec<Option<f64>>,
    pub window_start_s: Vec<f64>,
    pub window_s: f64,
    pub step_s: f64,
}

impl HrTrack {
    /// Pair defined estimates with ground truth interpolated at window
    /// centers. Returns `(estimates, truth)`.
    pub fn paired_with(&self, truth: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        self.estimates
            .iter()
            .zip(&self.window_start_s)
            .filter_map(|(est, start)| {
                let bpm = (*est)?;
                let t = interpolate_track(truth, start + self.window_s / 2.0)?;
                Some((bpm, t))
            })
            .unzip()
    }

    pub fn report(&self, truth: &[(f64, f64)]) -> Result<HrReport> {
        let (est, reference) = self.paired_with(truth);
        HrReport::new(&est, &reference)
    }

    /// `time_s,bpm` rows; silent windows are written as `NaN`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<(f64, f64)> = self
            .window_start_s
            .iter()
            .zip(&self.estimates)
            .map(|(t, e)| (*t, e.unwrap_or(f64::NAN)))
            .collect();
        save_track(&rows, path, "time_s,bpm")
    }
}

/// Estimate heart rate in windows of `window_s` seconds advanced by
/// `step_s`. Each window is mean-removed, zero-padded to at least 4096
/// points, and the magnitude peak within 40–240 BPM is taken. Exact ties go
/// to the bin closest to the previous estimate.
pub fn estimate_bpm(ppg: &[f64], fs: f64, window_s: f64, step_s: f64) -> Result<HrTrack> {
    if !(fs >= 25.0) {
        return Err(Error::InvalidParameter(format!("sample rate must be at least 25 Hz, got {fs}")));
    }
    if !(window_s > 0.0 && step_s > 0.0) {
        return Err(Error::InvalidParameter("window and step must be positive".into()));
    }
    let win = (window_s * fs).round() as usize;
    let step = ((step_s * fs).round() as usize).max(1);
    if ppg.len() < win || win < 2 {
        return Err(Error::TooShort {
            needed: win.max(2),
            available: ppg.len(),
        });
    }
    let nfft = win.next_power_of_two().max(MIN_FFT_LEN);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let bin_hz = fs / nfft as f64;
    let lo = (MIN_BPM / 60.0 / bin_hz).ceil() as usize;
    let hi = ((MAX_BPM / 60.0 / bin_hz).floor() as usize).min(nfft / 2);

    let mut estimates = Vec::new();
    let mut starts = Vec::new();
    let mut previous: Option<f64> = None;
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + win <= ppg.len() {
        let window = &ppg[start..start + win];
        let mean = window.iter().sum::<f64>() / win as f64;
        let energy: f64 = window.iter().map(|v| (v - mean).powi(2)).sum();
        let estimate = if energy == 0.0 {
            None
        } else {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (dst, v) in buf.iter_mut().zip(window) {
                dst.re = v - mean;
            }
            fft.process(&mut buf);
            let peak = buf[lo..=hi].iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
            let bpm_of = |k: usize| k as f64 * bin_hz * 60.0;
            (lo..=hi)
                .filter(|&k| buf[k].norm_sqr() >= peak)
                .min_by(|&a, &b| {
                    let target = previous.unwrap_or(bpm_of(a));
                    (bpm_of(a) - target).abs().total_cmp(&(bpm_of(b) - target).abs())
                })
                .map(bpm_of)
        };
        if estimate.is_some() {
            previous = estimate;
        }
        estimates.push(estimate);
        starts.push(start as f64 / fs);
        start += step;
    }
    Ok(HrTrack {
        estimates,
        window_start_s: starts,
        window_s,
        step_s,
    })
}
