//! Synthetic datasets, fixed-length segmentation with per-segment
//! normalization, decimation and CSV I/O.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const DEFAULT_SEGMENT_LEN: usize = 128;
pub const DEFAULT_INPUT_BITS: u8 = 12;
pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 240.0;

const HARMONIC_AMPLITUDES: [f64; 3] = [1.0, 0.4, 0.15];
const ARTIFACT_COMPONENTS: usize = 5;
const ARTIFACT_BAND_HZ: (f64, f64) = (0.05, 0.5);
const NOISE_SNR_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: Vec<Channel>,
    pub sample_rate: f64,
    pub input_bit_depth: u8,
    /// Ground-truth heart rate as `(time_s, bpm)` pairs.
    pub bpm_true: Option<Vec<(f64, f64)>>,
}

impl Dataset {
    pub fn new(channels: Vec<Channel>, sample_rate: f64, input_bit_depth: u8) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(first) = channels.first() {
            if let Some(bad) = channels.iter().find(|c| c.samples.len() != first.samples.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.samples.len(),
                    found: bad.samples.len(),
                });
            }
        }
        Ok(Self {
            channels,
            sample_rate,
            input_bit_depth,
            bpm_true: None,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Decimate every channel by an integer factor.
    pub fn decimated(&self, factor: usize) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Ok(Channel {
                    name: c.name.clone(),
                    samples: decimate(&c.samples, factor)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            sample_rate: self.sample_rate / factor as f64,
            input_bit_depth: self.input_bit_depth,
            bpm_true: self.bpm_true.clone(),
        })
    }
}

/// One normalized window of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub channel: String,
    pub index: usize,
    /// Euclidean norm before normalization.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStream {
    pub segment_len: usize,
    pub segments: Vec<Segment>,
    /// Indices of all-zero windows that were dropped.
    pub skipped: Vec<usize>,
}

impl SegmentStream {
    /// Number of windows covered, including skipped ones.
    pub fn windows(&self) -> usize {
        self.segments.len() + self.skipped.len()
    }
}

/// Split into consecutive non-overlapping windows of `n` samples (the tail
/// shorter than `n` is dropped) and scale each to unit norm.
pub fn segment_and_normalize(samples: &[f64], n: usize, channel: &str) -> Result<SegmentStream> {
    if n == 0 {
        return Err(Error::InvalidParameter("segment length must be positive".into()));
    }
    if samples.len() < n {
        return Err(Error::TooShort {
            needed: n,
            available: samples.len(),
        });
    }
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (index, window) in samples.chunks_exact(n).enumerate() {
        let norm = window.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            log::warn!("channel {channel}: segment {index} is all zeros, skipped");
            skipped.push(index);
            continue;
        }
        segments.push(Segment {
            samples: window.iter().map(|v| v / norm).collect(),
            channel: channel.to_string(),
            index,
            norm,
        });
    }
    Ok(SegmentStream {
        segment_len: n,
        segments,
        skipped,
    })
}

/// Undo [`segment_and_normalize`]; skipped windows come back as zeros.
pub fn denormalize(stream: &SegmentStream) -> Vec<f64> {
    let mut out = vec![0.0; stream.windows() * stream.segment_len];
    for seg in &stream.segments {
        let start = seg.index * stream.segment_len;
        for (dst, v) in out[start..start + stream.segment_len].iter_mut().zip(&seg.samples) {
            *dst = v * seg.norm;
        }
    }
    out
}

/// Keep every `factor`-th sample. No anti-alias filtering.
pub fn decimate(samples: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::InvalidParameter("decimation factor must be at least 1".into()));
    }
    Ok(samples.iter().step_by(factor).copied().collect())
}

fn check_r(r: f64) -> Result<()> {
    if !(r.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) coefficient must satisfy |r| < 1, got {r}")));
    }
    Ok(())
}

/// One stationary AR(1) path with unit marginal variance.
pub fn ar1_path(r: f64, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    check_r(r)?;
    let innovation = (1.0 - r * r).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut prev: f64 = rng.sample(StandardNormal);
    for i in 0..n {
        if i > 0 {
            let w: f64 = rng.sample(StandardNormal);
            prev = r * prev + innovation * w;
        }
        x.push(prev);
    }
    Ok(x)
}

/// `count` independent unit-norm AR(1) segments of length `n`.
pub fn synth_ar1(r: f64, n: usize, count: usize, seed: u64) -> Result<SegmentStream> {
    check_r(r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(count);
    for index in 0..count {
        let path = ar1_path(r, n, &mut rng)?;
        let norm = path.iter().map(|v| v * v).sum::<f64>().sqrt();
        segments.push(Segment {
            samples: path.iter().map(|v| v / norm).collect(),
            channel: "ar1".into(),
            index,
            norm,
        });
    }
    Ok(SegmentStream {
        segment_len: n,
        segments,
        skipped: Vec::new(),
    })
}

/// Heart-rate trajectory for synthetic PPG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BpmProfile {
    Constant(f64),
    /// Linear from `start` at t = 0 to `end` at the end of the recording.
    Ramp { start: f64, end: f64 },
}

impl BpmProfile {
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            BpmProfile::Constant(b) => b,
            BpmProfile::Ramp { start, end } => {
                let frac = if duration > 0.0 { (t / duration).clamp(0.0, 1.0) } else { 0.0 };
                start + (end - start) * frac
            }
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            BpmProfile::Constant(b) => (b, b),
            BpmProfile::Ramp { start, end } => (start.min(end), start.max(end)),
        }
    }
}

impl FromStr for BpmProfile {
    type Err = Error;

    /// `const:<bpm>` or `ramp:<start>:<end>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad BPM value {p:?} in profile {s:?}")))
        };
        match parts.as_slice() {
            ["const", b] => Ok(BpmProfile::Constant(num(b)?)),
            ["ramp", a, b] => Ok(BpmProfile::Ramp {
                start: num(a)?,
                end: num(b)?,
            }),
            _ => Err(Error::InvalidConfig(format!(
                "BPM profile must be const:<bpm> or ramp:<start>:<end>, got {s:?}"
            ))),
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Synthetic wrist PPG with accelerometer channels.
///
/// The pulse is three harmonics of the instantaneous heart rate, integrated
/// as a running phase so that ramps stay smooth. Motion is a sum of
/// low-frequency sinusoids scaled to `artifact_level` times the pulse RMS;
/// the accelerometer axes carry different mixtures of the same components.
/// White noise is added at 30 dB SNR. Ground truth is recorded once per
/// second.
pub fn synth_ppg(
    duration_s: f64,
    fs: f64,
    profile: BpmProfile,
    artifact_level: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(fs >= 25.0) {
        return Err(Error::InvalidParameter(format!("sample rate must be at least 25 Hz, got {fs}")));
    }
    if !(duration_s > 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration_s}")));
    }
    let (lo, hi) = profile.bounds();
    if lo < MIN_BPM || hi > MAX_BPM {
        return Err(Error::InvalidParameter(format!(
            "BPM track must stay within [{MIN_BPM}, {MAX_BPM}], got [{lo}, {hi}]"
        )));
    }
    if !(artifact_level >= 0.0) {
        return Err(Error::InvalidParameter(format!("artifact level must be non-negative, got {artifact_level}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * fs).round() as usize;
    let offsets: Vec<f64> = HARMONIC_AMPLITUDES.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let mut pulse = Vec::with_capacity(n);
    let mut phase = 0.0;
    for i in 0..n {
        let t = i as f64 / fs;
        let v: f64 = HARMONIC_AMPLITUDES
            .iter()
            .zip(&offsets)
            .enumerate()
            .map(|(h, (a, off))| a * ((h + 1) as f64 * phase + off).sin())
            .sum();
        pulse.push(v);
        phase += 2.0 * PI * profile.at(t, duration_s) / 60.0 / fs;
    }

    let components: Vec<(f64, f64, f64)> = (0..ARTIFACT_COMPONENTS)
        .map(|_| {
            (
                rng.random_range(ARTIFACT_BAND_HZ.0..ARTIFACT_BAND_HZ.1),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    let component_at = |k: usize, i: usize| {
        let (f, ph, a) = components[k];
        a * (2.0 * PI * f * i as f64 / fs + ph).sin()
    };
    let raw_artifact: Vec<f64> = (0..n)
        .map(|i| (0..ARTIFACT_COMPONENTS).map(|k| component_at(k, i)).sum())
        .collect();
    let artifact_gain = if rms(&raw_artifact) > 0.0 {
        artifact_level * rms(&pulse) / rms(&raw_artifact)
    } else {
        0.0
    };

    let mut ppg: Vec<f64> = pulse.iter().zip(&raw_artifact).map(|(p, a)| p + artifact_gain * a).collect();
    let noise_sd = rms(&ppg) * 10f64.powf(-NOISE_SNR_DB / 20.0);
    for v in ppg.iter_mut() {
        *v += noise_sd * rng.sample::<f64, _>(StandardNormal);
    }

    let mut channels = vec![Channel {
        name: "ppg".into(),
        samples: ppg,
    }];
    for axis in ["ax", "ay", "az"] {
        let weights: Vec<f64> = (0..ARTIFACT_COMPONENTS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut samples: Vec<f64> = (0..n)
            .map(|i| weights.iter().enumerate().map(|(k, w)| w * component_at(k, i)).sum())
            .collect();
        let sd = rms(&samples).max(1e-3) * 10f64.powf(-NOISE_SNR_DB / 20.0);
        for v in samples.iter_mut() {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
        channels.push(Channel {
            name: axis.into(),
            samples,
        });
    }

    let mut ds = Dataset::new(channels, fs, DEFAULT_INPUT_BITS)?;
    let seconds = duration_s.floor() as usize;
    ds.bpm_true = Some(
        (0..=seconds)
            .map(|s| (s as f64, profile.at(s as f64, duration_s)))
            .collect(),
    );
    Ok(ds)
}

/// Linear interpolation into a `(time, value)` track, clamped at the ends.
pub fn interpolate_track(track: &[(f64, f64)], t: f64) -> Option<f64> {
    let first = track.first()?;
    let last = track.last()?;
    if t <= first.0 {
        return Some(first.1);
    }
    if t >= last.0 {
        return Some(last.1);
    }
    let i = track.partition_point(|p| p.0 <= t);
    let (t0, v0) = track[i - 1];
    let (t1, v1) = track[i];
    Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
}

/// Path of the heart-rate side file: `data.csv` → `data.bpm.csv`.
pub fn bpm_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.bpm.csv"))
}

/// Write `# fs=.. bi=..`, the channel names, then one row per sample. Values
/// use the shortest representation that parses back to the same `f64`.
/// Ground truth, when present, goes to [`bpm_path`].
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# fs={} bi={}", ds.sample_rate, ds.input_bit_depth)?;
    let names: Vec<&str> = ds.channels.iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}", names.join(","))?;
    let mut line = String::new();
    for i in 0..ds.len() {
        line.clear();
        for (k, c) in ds.channels.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&c.samples[i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    if let Some(track) = &ds.bpm_true {
        save_track(track, &bpm_path(path), "time_s,bpm")?;
    }
    Ok(())
}

/// Two-column CSV with a header line.
pub fn save_track(track: &[(f64, f64)], path: &Path, header: &str) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for (t, v) in track {
        writeln!(out, "{t},{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_track(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let f = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {:?}", &rec[i]),
            })
        };
        out.push((f(0)?, f(1)?));
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn parse_meta(line: &str) -> Result<(f64, u8)> {
    let bad = || Error::Parse {
        line: 1,
        msg: format!("expected '# fs=<Hz> bi=<bits>', found {line:?}"),
    };
    let body = line.trim().strip_prefix('#').ok_or_else(bad)?;
    let (mut fs_hz, mut bits) = (None, None);
    for tok in body.split_whitespace() {
        match tok.split_once('=') {
            Some(("fs", v)) => fs_hz = Some(v.parse::<f64>().map_err(|_| bad())?),
            Some(("bi", v)) => bits = Some(v.parse::<u8>().map_err(|_| bad())?),
            _ => {}
        }
    }
    Ok((fs_hz.ok_or_else(bad)?, bits.ok_or_else(bad)?))
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut meta = String::new();
    reader.read_line(&mut meta)?;
    let (fs_hz, bits) = parse_meta(&meta)?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            // The reader started after the metadata line.
            match csv_err(e) {
                Error::Parse { line, msg } => Error::Parse { line: line + 1, msg },
                other => other,
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line()) + 1;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?);
        }
    }
    let channels = names
        .into_iter()
        .zip(columns)
        .map(|(name, samples)| Channel { name, samples })
        .collect();
    let mut ds = Dataset::new(channels, fs_hz, bits)?;
    let side = bpm_path(path);
    if side.exists() {
        ds.bpm_true = Some(load_track(&side)?);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag_autocorrelation(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum();
        cov / var
    }

    #[test]
    fn ar1_autocorrelation_matches_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let white = ar1_path(0.0, 100_000, &mut rng).unwrap();
        assert!(lag_autocorrelation(&white, 1).abs() < 0.05);
        let red = ar1_path(0.95, 100_000, &mut rng).unwrap();
        for k in 1..=5 {
            let expected = 0.95f64.powi(k as i32);
            assert!((lag_autocorrelation(&red, k) - expected).abs() < 0.02 + 0.01 * k as f64, "lag {k}");
        }
        assert!(ar1_path(1.0, 4, &mut rng).is_err());
    }

    #[test]
    fn synth_ar1_segments() {
        let a = synth_ar1(0.95, 128, 74, 2).unwrap();
        assert_eq!(a.segments.len(), 74);
        for s in &a.segments {
            let norm: f64 = s.samples.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_eq!(a, synth_ar1(0.95, 128, 74, 2).unwrap());
        assert!(synth_ar1(-1.0, 128, 1, 0).is_err());
    }

    #[test]
    fn segmentation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x: Vec<f64> = (0..1000).map(|_| rng.random_range(-2.0..2.0)).collect();
        x[256..384].iter_mut().for_each(|v| *v = 0.0);
        let stream = segment_and_normalize(&x, 128, "ppg").unwrap();
        assert_eq!(stream.windows(), 7);
        assert_eq!(stream.skipped, vec![2]);
        for s in &stream.segments {
            let norm: f64 = s.samples.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let back = denormalize(&stream);
        assert_eq!(back.len(), 896);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(segment_and_normalize(&x[..100], 128, "ppg").is_err());
    }

    #[test]
    fn five_minutes_gives_74_segments() {
        let n = (300.0f64 * 31.75).round() as usize;
        assert_eq!(n, 9525);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        assert_eq!(segment_and_normalize(&x, 128, "ppg").unwrap().segments.len(), 74);
    }

    #[test]
    fn decimation() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(decimate(&x, 1).unwrap(), x);
        assert_eq!(decimate(&x, 4).unwrap(), vec![0.0, 4.0, 8.0]);
        assert_eq!(decimate(&x, 4).unwrap().len(), x.len().div_ceil(4));
        assert!(decimate(&x, 0).is_err());
    }

    #[test]
    fn bpm_profiles() {
        assert_eq!("const:120".parse::<BpmProfile>().unwrap(), BpmProfile::Constant(120.0));
        let ramp: BpmProfile = "ramp:80:160".parse().unwrap();
        assert_eq!(ramp.at(0.0, 300.0), 80.0);
        assert_eq!(ramp.at(150.0, 300.0), 120.0);
        assert_eq!(ramp.at(300.0, 300.0), 160.0);
        assert!("ramp:80".parse::<BpmProfile>().is_err());
        assert!("sine:1:2".parse::<BpmProfile>().is_err());
    }

    #[test]
    fn synth_ppg_validation_and_determinism() {
        let p = BpmProfile::Constant(120.0);
        assert!(synth_ppg(10.0, 20.0, p, 0.0, 1).is_err());
        assert!(synth_ppg(10.0, 125.0, BpmProfile::Constant(250.0), 0.0, 1).is_err());
        let a = synth_ppg(10.0, 125.0, p, 0.2, 1).unwrap();
        assert_eq!(a, synth_ppg(10.0, 125.0, p, 0.2, 1).unwrap());
        assert_eq!(a.channels.len(), 4);
        assert_eq!(a.len(), 1250);
        assert_eq!(a.bpm_true.as_ref().unwrap().len(), 11);
    }

    #[test]
    fn interpolation() {
        let track = [(0.0, 80.0), (10.0, 100.0)];
        assert_eq!(interpolate_track(&track, 5.0), Some(90.0));
        assert_eq!(interpolate_track(&track, -1.0), Some(80.0));
        assert_eq!(interpolate_track(&track, 11.0), Some(100.0));
        assert_eq!(interpolate_track(&[], 1.0), None);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut ds = synth_ppg(5.0, 31.25, BpmProfile::Constant(90.0), 0.1, 4).unwrap();
        ds.channels[0].samples[0] = 0.1 + 0.2; // not exactly representable in short form
        save_csv(&ds, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap(), ds);

        ds.bpm_true = None;
        fs::remove_file(bpm_path(&path)).unwrap();
        save_csv(&ds, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap().bpm_true, None);
    }

    #[test]
    fn ragged_csv_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "# fs=100 bi=12\na,b\n1,2\n3\n").unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "# fs=100 bi=12\na,b\n1,2\n3,x\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 4, .. })));
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { line: 1, .. })));
    }
}
