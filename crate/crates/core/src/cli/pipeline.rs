//! Segment-level encode/decode shared by the subcommands, the sweep and the
//! Python bindings.
//!
//! The encoder normalizes each window, measures it with Φ, quantizes with a
//! per-segment `V_ref = vref_frac·max|y|` and emits one payload per segment.
//! Norms and `V_ref` values travel in a sidecar. The decoder sees only
//! payloads and sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algo, ExperimentConfig};
use crate::bdq::{recover, recover_blind, Diagnostics, Recovery};
use crate::error::{Error, Result};
use crate::metrics::{arsnr, rsnr, ssim_1d};
use crate::quantizer::{dequantize, quantize, QuantizedPayload, QuantizerConfig};
use crate::sensing::{compress, SparseBinaryMatrix};
use crate::signals::{denormalize, segment_and_normalize, Channel, Dataset, Segment, SegmentStream};

pub const SIDECAR_FILE: &str = "sidecar.json";
pub const PAYLOAD_DIR: &str = "payloads";
/// Side-channel cost per segment: the norm and `V_ref`, one f64 each.
pub const SIDECAR_BITS_PER_SEGMENT: u32 = 128;

/// Codec parameters for one (M, B) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecSettings {
    pub n: usize,
    pub m: usize,
    pub bits: u8,
    pub input_bits: u8,
    pub vref_frac: f64,
    pub seed: u64,
    pub per_segment_matrix: bool,
}

impl CodecSettings {
    pub fn from_config(cfg: &ExperimentConfig, m: usize, bits: u8) -> Self {
        Self {
            n: cfg.n,
            m,
            bits,
            input_bits: cfg.input_bits,
            vref_frac: cfg.vref_frac,
            seed: cfg.seed,
            per_segment_matrix: cfg.per_segment_matrix,
        }
    }

    /// Seed of Φ for the `ordinal`-th emitted segment.
    pub fn matrix_seed(&self, ordinal: u64) -> u64 {
        if self.per_segment_matrix {
            splitmix64(self.seed ^ splitmix64(ordinal))
        } else {
            self.seed
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub channel: String,
    pub index: usize,
    pub norm: f64,
    pub v_ref: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub name: String,
    pub windows: usize,
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub m: usize,
    pub bit_depth: u8,
    pub input_bit_depth: u8,
    pub vref_frac: f64,
    pub sample_rate: f64,
    pub per_segment_matrix: bool,
    pub compression_ratio: f64,
    pub bit_compression_ratio: f64,
    pub payload_bits_per_segment: usize,
    pub overhead_bits_per_segment: u32,
    pub channels: Vec<ChannelLayout>,
    pub segments: Vec<SegmentRecord>,
}

/// Payloads in sidecar order.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub sidecar: Sidecar,
    pub payloads: Vec<QuantizedPayload>,
}

/// Measure and quantize one unit-norm segment.
pub fn encode_segment(x: &[f64], phi: &SparseBinaryMatrix, bits: u8, vref_frac: f64) -> Result<QuantizedPayload> {
    let y = compress(phi, x)?;
    let peak = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // A segment in the null space of Φ measures to zero; any positive
    // reference then quantizes it to the two central levels.
    let v_ref = if peak > 0.0 { vref_frac * peak } else { f64::EPSILON };
    let cfg = QuantizerConfig::new(v_ref, bits)?;
    Ok(quantize(&y, &cfg)
        .with_segment_len(x.len() as u32)
        .with_matrix_seed(phi.seed()))
}

struct MatrixCache {
    rows: usize,
    cols: usize,
    cache: BTreeMap<u64, SparseBinaryMatrix>,
}

impl MatrixCache {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cache: BTreeMap::new(),
        }
    }

    fn get(&mut self, seed: u64) -> Result<&SparseBinaryMatrix> {
        if !self.cache.contains_key(&seed) {
            let phi = SparseBinaryMatrix::generate(self.rows, self.cols, seed)?;
            self.cache.insert(seed, phi);
        }
        Ok(&self.cache[&seed])
    }
}

/// Segment the selected channels and encode every retained segment.
pub fn encode_dataset(ds: &Dataset, channels: &[String], settings: &CodecSettings) -> Result<Encoded> {
    let selected = select_channels(ds, channels)?;
    let mut matrices = MatrixCache::new(settings.m, settings.n);
    let mut layouts = Vec::new();
    let mut records = Vec::new();
    let mut payloads = Vec::new();
    for channel in selected {
        let stream = segment_and_normalize(&channel.samples, settings.n, &channel.name)?;
        for seg in &stream.segments {
            let seed = settings.matrix_seed(payloads.len() as u64);
            let phi = matrices.get(seed)?;
            let payload = encode_segment(&seg.samples, phi, settings.bits, settings.vref_frac)?
                .with_input_bit_depth(settings.input_bits)
                .with_segment_index(seg.index as u32);
            records.push(SegmentRecord {
                channel: channel.name.clone(),
                index: seg.index,
                norm: seg.norm,
                v_ref: payload.header.v_ref,
                file: format!("{}_{:05}.qcs", channel.name, seg.index),
            });
            payloads.push(payload);
        }
        layouts.push(ChannelLayout {
            name: channel.name.clone(),
            windows: stream.windows(),
            skipped: stream.skipped.clone(),
        });
    }
    let sidecar = Sidecar {
        n: settings.n,
        m: settings.m,
        bit_depth: settings.bits,
        input_bit_depth: settings.input_bits,
        vref_frac: settings.vref_frac,
        sample_rate: ds.sample_rate,
        per_segment_matrix: settings.per_segment_matrix,
        compression_ratio: crate::sensing::compression_ratio(settings.m, settings.n),
        bit_compression_ratio: crate::sensing::bit_compression_ratio(
            settings.m,
            settings.n,
            settings.bits,
            settings.input_bits,
        ),
        payload_bits_per_segment: settings.m * settings.bits as usize,
        overhead_bits_per_segment: SIDECAR_BITS_PER_SEGMENT,
        channels: layouts,
        segments: records,
    };
    Ok(Encoded { sidecar, payloads })
}

fn select_channels<'a>(ds: &'a Dataset, names: &[String]) -> Result<Vec<&'a Channel>> {
    if names.is_empty() {
        return Ok(ds.channels.iter().collect());
    }
    names
        .iter()
        .map(|name| {
            ds.channel(name)
                .ok_or_else(|| Error::InvalidConfig(format!("dataset has no channel {name:?}")))
        })
        .collect()
}

impl Encoded {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let payload_dir = dir.join(PAYLOAD_DIR);
        fs::create_dir_all(&payload_dir)?;
        for (record, payload) in self.sidecar.segments.iter().zip(&self.payloads) {
            fs::write(payload_dir.join(&record.file), payload.to_bytes()?)?;
        }
        let json = serde_json::to_string_pretty(&self.sidecar)
            .map_err(|e| Error::CorruptPayload(format!("sidecar serialization: {e}")))?;
        fs::write(dir.join(SIDECAR_FILE), json + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(SIDECAR_FILE))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptPayload(format!("sidecar: {e}")))?;
        let payloads = sidecar
            .segments
            .iter()
            .map(|r| QuantizedPayload::from_bytes(&fs::read(dir.join(PAYLOAD_DIR).join(&r.file))?))
            .collect::<Result<Vec<_>>>()?;
        let encoded = Self { sidecar, payloads };
        encoded.check_consistency()?;
        Ok(encoded)
    }

    /// Every payload header must agree with the sidecar.
    pub fn check_consistency(&self) -> Result<()> {
        let s = &self.sidecar;
        if s.segments.len() != self.payloads.len() {
            return Err(Error::CorruptPayload(format!(
                "sidecar lists {} segments but {} payloads were found",
                s.segments.len(),
                self.payloads.len()
            )));
        }
        for (record, payload) in s.segments.iter().zip(&self.payloads) {
            let h = &payload.header;
            let mismatch = h.n as usize != s.n
                || h.m as usize != s.m
                || h.bit_depth != s.bit_depth
                || h.segment_index as usize != record.index
                || h.v_ref.to_bits() != record.v_ref.to_bits();
            if mismatch {
                return Err(Error::CorruptPayload(format!(
                    "header of {} does not match the sidecar",
                    record.file
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of recovering one segment. A failed segment is reconstructed as
/// zeros and carries the error message.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentOutcome {
    pub channel: String,
    pub index: usize,
    pub error: Option<String>,
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip)]
    pub x_hat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Decoded {
    /// Denormalized reconstruction, one channel per sidecar layout.
    pub dataset: Dataset,
    pub outcomes: Vec<SegmentOutcome>,
}

impl Decoded {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }
}

pub fn recover_segment(payload: &QuantizedPayload, phi: &SparseBinaryMatrix, algo: Algo, cfg: &ExperimentConfig) -> Result<Recovery> {
    let quantizer = payload.config()?;
    let z = dequantize(payload)?;
    let opts = cfg.bdq_options(quantizer.v_ref(), quantizer.cell_width());
    match algo {
        Algo::Bdq => recover(&z, phi, &opts),
        Algo::BdqBlind => recover_blind(&z, phi, &opts),
    }
}

/// Recover every segment on the rayon pool and reassemble the channels.
/// Results are merged in sidecar order.
pub fn decode(encoded: &Encoded, algo: Algo, cfg: &ExperimentConfig) -> Result<Decoded> {
    encoded.check_consistency()?;
    let s = &encoded.sidecar;
    let mut matrices = MatrixCache::new(s.m, s.n);
    for p in &encoded.payloads {
        matrices.get(p.header.matrix_seed)?;
    }
    let matrices = &matrices.cache;
    let outcomes: Vec<SegmentOutcome> = s
        .segments
        .par_iter()
        .zip(encoded.payloads.par_iter())
        .map(|(record, payload)| {
            let phi = &matrices[&payload.header.matrix_seed];
            let (x_hat, error, diagnostics) = match recover_segment(payload, phi, algo, cfg) {
                Ok(r) => (r.x_hat, None, Some(r.diagnostics)),
                Err(e) => {
                    log::warn!("{} segment {}: {e}", record.channel, record.index);
                    (vec![0.0; s.n], Some(e.to_string()), None)
                }
            };
            SegmentOutcome {
                channel: record.channel.clone(),
                index: record.index,
                error,
                diagnostics,
                x_hat,
            }
        })
        .collect();

    let mut channels = Vec::new();
    for layout in &s.channels {
        let segments = s
            .segments
            .iter()
            .zip(&outcomes)
            .filter(|(r, _)| r.channel == layout.name)
            .map(|(r, o)| Segment {
                samples: o.x_hat.clone(),
                channel: r.channel.clone(),
                index: r.index,
                norm: r.norm,
            })
            .collect();
        let stream = SegmentStream {
            segment_len: s.n,
            segments,
            skipped: layout.skipped.clone(),
        };
        channels.push(Channel {
            name: layout.name.clone(),
            samples: denormalize(&stream),
        });
    }
    let dataset = Dataset::new(channels, s.sample_rate, s.input_bit_depth)?;
    Ok(Decoded { dataset, outcomes })
}

/// Per-segment quality of a reconstruction against the original data.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentScore {
    pub channel: String,
    pub index: usize,
    pub rsnr_db: f64,
    /// `NaN` where SSIM is undefined (constant reference).
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub scores: Vec<SegmentScore>,
    pub arsnr_db: f64,
    /// Mean over segments with a defined SSIM.
    pub mean_ssim: f64,
}

impl Evaluation {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(["channel", "index", "rsnr_db", "ssim"]).map_err(csv_io)?;
        for s in &self.scores {
            w.write_record([
                s.channel.clone(),
                s.index.to_string(),
                s.rsnr_db.to_string(),
                s.ssim.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Compare recovered segments with the same segments of `original`,
/// both in the normalized domain.
pub fn evaluate(original: &Dataset, decoded: &Decoded, n: usize) -> Result<Evaluation> {
    let mut streams: BTreeMap<&str, SegmentStream> = BTreeMap::new();
    for o in &decoded.outcomes {
        if !streams.contains_key(o.channel.as_str()) {
            let ch = original
                .channel(&o.channel)
                .ok_or_else(|| Error::InvalidConfig(format!("reference has no channel {:?}", o.channel)))?;
            streams.insert(&o.channel, segment_and_normalize(&ch.samples, n, &ch.name)?);
        }
    }
    let mut scores = Vec::new();
    let mut pairs = Vec::new();
    for o in &decoded.outcomes {
        let reference = streams[o.channel.as_str()]
            .segments
            .iter()
            .find(|s| s.index == o.index)
            .ok_or_else(|| Error::CorruptPayload(format!("reference lacks {} segment {}", o.channel, o.index)))?;
        scores.push(SegmentScore {
            channel: o.channel.clone(),
            index: o.index,
            rsnr_db: rsnr(&reference.samples, &o.x_hat)?,
            ssim: ssim_1d(&reference.samples, &o.x_hat).unwrap_or(f64::NAN),
        });
        pairs.push((reference.samples.as_slice(), o.x_hat.as_slice()));
    }
    let defined: Vec<f64> = scores.iter().map(|s| s.ssim).filter(|v| v.is_finite()).collect();
    let mean_ssim = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(Evaluation {
        arsnr_db: arsnr(pairs)?,
        mean_ssim,
        scores,
    })
}

/// Score a full recovered dataset against its reference. Both are cut into
/// windows of `n`; each recovered window is divided by the norm of the
/// matching reference window so the scores equal those of [`evaluate`].
pub fn evaluate_datasets(reference: &Dataset, recovered: &Dataset, channels: &[String], n: usize) -> Result<Evaluation> {
    let mut outcomes = Vec::new();
    for ch in select_channels(recovered, channels)? {
        let original = reference
            .channel(&ch.name)
            .ok_or_else(|| Error::InvalidConfig(format!("reference has no channel {:?}", ch.name)))?;
        let stream = segment_and_normalize(&original.samples, n, &ch.name)?;
        for seg in &stream.segments {
            let window = ch.samples.get(seg.index * n..(seg.index + 1) * n).ok_or(Error::TooShort {
                needed: (seg.index + 1) * n,
                available: ch.samples.len(),
            })?;
            outcomes.push(SegmentOutcome {
                channel: ch.name.clone(),
                index: seg.index,
                error: None,
                diagnostics: None,
                x_hat: window.iter().map(|v| v / seg.norm).collect(),
            });
        }
    }
    let decoded = Decoded {
        dataset: recovered.clone(),
        outcomes,
    };
    evaluate(reference, &decoded, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::synth_ar1;

    fn small_dataset() -> Dataset {
        let stream = synth_ar1(0.95, 32, 4, 9).unwrap();
        let samples: Vec<f64> = stream.segments.iter().flat_map(|s| s.samples.iter().map(|v| 3.0 * v)).collect();
        let mut zeros = vec![0.0; 32];
        zeros.extend_from_slice(&samples);
        Dataset::new(
            vec![Channel {
                name: "x".into(),
                samples: zeros,
            }],
            31.25,
            12,
        )
        .unwrap()
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 32,
            max_iter: 20,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let ds = small_dataset();
        let cfg = small_config();
        let settings = CodecSettings::from_config(&cfg, 16, 3);
        let enc = encode_dataset(&ds, &[], &settings).unwrap();
        assert_eq!(enc.payloads.len(), 4);
        assert_eq!(enc.sidecar.channels[0].skipped, vec![0]);
        assert!(enc.payloads.iter().all(|p| p.body_len() == 6));

        let dir = tempfile::tempdir().unwrap();
        enc.write(dir.path()).unwrap();
        let back = Encoded::read(dir.path()).unwrap();
        assert_eq!(back, enc);

        let dec = decode(&back, Algo::Bdq, &cfg).unwrap();
        assert_eq!(dec.dataset.len(), ds.len());
        assert!(dec.dataset.channels[0].samples[..32].iter().all(|&v| v == 0.0));
        let eval = evaluate(&ds, &dec, 32).unwrap();
        assert_eq!(eval.scores.len(), 4);
        assert!(eval.arsnr_db > 0.0);
    }

    #[test]
    fn per_segment_matrices_are_recorded() {
        let ds = small_dataset();
        let mut cfg = small_config();
        cfg.per_segment_matrix = true;
        let enc = encode_dataset(&ds, &[], &CodecSettings::from_config(&cfg, 16, 2)).unwrap();
        let seeds: std::collections::BTreeSet<u64> = enc.payloads.iter().map(|p| p.header.matrix_seed).collect();
        assert_eq!(seeds.len(), 4);
        let a = decode(&enc, Algo::BdqBlind, &cfg).unwrap();
        let b = decode(&enc, Algo::BdqBlind, &cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn tampered_header_is_rejected() {
        let ds = small_dataset();
        let cfg = small_config();
        let mut enc = encode_dataset(&ds, &[], &CodecSettings::from_config(&cfg, 16, 2)).unwrap();
        enc.payloads[1].header.v_ref *= 2.0;
        assert!(matches!(decode(&enc, Algo::Bdq, &cfg), Err(Error::CorruptPayload(_))));
        assert!(encode_dataset(&ds, &["nope".into()], &CodecSettings::from_config(&cfg, 16, 2)).is_err());
    }
}
