use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bdq::BdqOptions;
use crate::error::{Error, Result};
use crate::quantizer::MAX_BIT_DEPTH;
use crate::signals::{BpmProfile, DEFAULT_INPUT_BITS, DEFAULT_SEGMENT_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Algo {
    Bdq,
    BdqBlind,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Bdq => "bdq",
            Algo::BdqBlind => "bdq-blind",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bdq" => Ok(Algo::Bdq),
            "bdq-blind" => Ok(Algo::BdqBlind),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Ppg,
    Ar1,
}

/// Parameters for generating a dataset instead of loading one.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub duration_s: f64,
    pub bpm_profile: BpmProfile,
    pub artifact_level: f64,
    /// Generation rate before decimation.
    pub fs: f64,
    pub decimate: usize,
    pub r: f64,
    pub segments: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::Ppg,
            duration_s: 300.0,
            bpm_profile: BpmProfile::Ramp {
                start: 80.0,
                end: 160.0,
            },
            artifact_level: 0.2,
            fs: 125.0,
            decimate: 4,
            r: 0.95,
            segments: 74,
            seed: 1,
        }
    }
}

/// Everything a compress/recover/sweep run needs.
///
/// Read from a flat `key = value` file (blank lines and `#` comments
/// ignored) and then patched by command-line flags through [`set`].
///
/// [`set`]: ExperimentConfig::set
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m_list: Vec<usize>,
    pub b_list: Vec<u8>,
    pub input_bits: u8,
    pub vref_frac: f64,
    pub seed: u64,
    /// Draw a fresh Φ for every segment instead of one per run.
    pub per_segment_matrix: bool,
    pub algos: Vec<Algo>,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub saturation_aware: bool,
    pub dataset: Option<PathBuf>,
    pub synth: SynthSpec,
    /// Restrict processing to these channels; empty means all.
    pub channels: Vec<String>,
    pub out: PathBuf,
    pub hr_window_s: f64,
    pub hr_step_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let bdq = BdqOptions::default();
        Self {
            n: DEFAULT_SEGMENT_LEN,
            m_list: vec![64],
            b_list: vec![2],
            input_bits: DEFAULT_INPUT_BITS,
            vref_frac: 0.70,
            seed: 0,
            per_segment_matrix: false,
            algos: vec![Algo::Bdq],
            lambda: bdq.lambda,
            max_iter: bdq.max_iter,
            tol: bdq.tol,
            saturation_aware: bdq.saturation_aware,
            dataset: None,
            synth: SynthSpec::default(),
            channels: Vec::new(),
            out: PathBuf::from("out"),
            hr_window_s: crate::hr::DEFAULT_WINDOW_S,
            hr_step_s: crate::hr::DEFAULT_STEP_S,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value, found {raw:?}", i + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Apply one `key = value` setting. List-valued keys take
    /// comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "m" => self.m_list = parse_list(key, value)?,
            "b" => self.b_list = parse_list(key, value)?,
            "bi" => self.input_bits = parse(key, value)?,
            "vref_frac" => self.vref_frac = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "per_segment_matrix" => self.per_segment_matrix = parse(key, value)?,
            "algo" => self.algos = parse_list(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "saturation_aware" => self.saturation_aware = parse(key, value)?,
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "channels" => {
                self.channels = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "out" => self.out = PathBuf::from(value),
            "hr_window_s" => self.hr_window_s = parse(key, value)?,
            "hr_step_s" => self.hr_step_s = parse(key, value)?,
            "kind" => {
                self.synth.kind = match value {
                    "ppg" => SynthKind::Ppg,
                    "ar1" => SynthKind::Ar1,
                    other => return Err(Error::InvalidConfig(format!("unknown kind {other:?}"))),
                }
            }
            "duration" => self.synth.duration_s = parse(key, value)?,
            "bpm_profile" => self.synth.bpm_profile = value.parse()?,
            "artifact_level" => self.synth.artifact_level = parse(key, value)?,
            "fs" => self.synth.fs = parse(key, value)?,
            "decimate" => self.synth.decimate = parse(key, value)?,
            "r" => self.synth.r = parse(key, value)?,
            "segments" => self.synth.segments = parse(key, value)?,
            "synth_seed" => self.synth.seed = parse(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.m_list.is_empty() || self.b_list.is_empty() || self.algos.is_empty() {
            return bad("m, b and algo lists must be non-empty".into());
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m == 0 || m >= self.n) {
            return bad(format!("every m must satisfy 0 < m < n = {}, got {m}", self.n));
        }
        if !(1..=MAX_BIT_DEPTH).contains(&self.input_bits) {
            return bad(format!("bi must be in 1..={MAX_BIT_DEPTH}, got {}", self.input_bits));
        }
        if let Some(b) = self.b_list.iter().find(|&&b| b == 0 || b > self.input_bits) {
            return bad(format!("every b must satisfy 1 ≤ b ≤ bi = {}, got {b}", self.input_bits));
        }
        if !(self.vref_frac > 0.0 && self.vref_frac <= 1.0) {
            return bad(format!("vref_frac must be in (0, 1], got {}", self.vref_frac));
        }
        if !(self.hr_window_s > 0.0 && self.hr_step_s > 0.0) {
            return bad("HR window and step must be positive".into());
        }
        self.bdq_options(1.0, 0.0).validate()
    }

    /// Recovery options for a quantizer with reference `v_ref` and cell
    /// width `delta`.
    pub fn bdq_options(&self, v_ref: f64, delta: f64) -> BdqOptions {
        BdqOptions {
            lambda: self.lambda,
            max_iter: self.max_iter,
            tol: self.tol,
            saturation_aware: self.saturation_aware,
            ..BdqOptions::for_quantizer(v_ref, delta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = ExperimentConfig::from_text(
            "# sweep\n n = 128\nm = 32, 64,96\nb=2,3,4,6,8 # grid\nalgo = bdq,bdq-blind\nbpm_profile = ramp:80:160\n",
        )
        .unwrap();
        assert_eq!(cfg.m_list, vec![32, 64, 96]);
        assert_eq!(cfg.b_list, vec![2, 3, 4, 6, 8]);
        assert_eq!(cfg.algos, vec![Algo::Bdq, Algo::BdqBlind]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(ExperimentConfig::from_text("nonsense").is_err());
        assert!(ExperimentConfig::from_text("colour = red").is_err());
        assert!(ExperimentConfig::from_text("m = x").is_err());
        let cfg = ExperimentConfig { m_list: vec![128], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { b_list: vec![13], ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { vref_frac: 0.0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { lambda: -1.0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
