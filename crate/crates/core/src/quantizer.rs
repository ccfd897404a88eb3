//! Uniform mid-point quantizer with symmetric saturation, plus the packed
//! binary payload that carries quantized measurements over the air.
//!
//! The input range `[-v_ref, v_ref]` is split into `2^B` cells of width
//! `Δ = 2·v_ref / 2^B`. Cell `k` covers `[-v_ref + kΔ, -v_ref + (k+1)Δ)`;
//! the top cell also contains `v_ref` itself. Inputs beyond either rail are
//! clamped to the extreme level. Decoding returns the cell mid-point.

use crate::error::{Error, Result};

pub const MAX_BIT_DEPTH: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    v_ref: f64,
    bit_depth: u8,
}

impl QuantizerConfig {
    pub fn new(v_ref: f64, bit_depth: u8) -> Result<Self> {
        if !(v_ref.is_finite() && v_ref > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reference voltage must be positive and finite, got {v_ref}"
            )));
        }
        if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "bit depth must be in 1..={MAX_BIT_DEPTH}, got {bit_depth}"
            )));
        }
        Ok(Self { v_ref, bit_depth })
    }

    pub fn v_ref(&self) -> f64 {
        self.v_ref
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Number of quantization levels, `2^B`.
    pub fn levels(&self) -> u32 {
        1u32 << self.bit_depth
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.v_ref / f64::from(self.levels())
    }

    /// Level index of a single sample.
    pub fn level_of(&self, v: f64) -> u16 {
        let top = self.levels() - 1;
        let k = ((v + self.v_ref) / self.cell_width()).floor();
        if k.is_nan() || k <= 0.0 {
            0
        } else if k >= f64::from(top) {
            top as u16
        } else {
            k as u16
        }
    }

    /// Mid-point reconstruction value of a level.
    pub fn value_of(&self, level: u16) -> Result<f64> {
        if u32::from(level) >= self.levels() {
            return Err(Error::CorruptPayload(format!(
                "level {level} out of range for {} bits",
                self.bit_depth
            )));
        }
        Ok(-self.v_ref + self.cell_width() * (f64::from(level) + 0.5))
    }

    /// Whether `level` is one of the two rail levels, where saturation may
    /// have hidden the true value.
    pub fn is_rail(&self, level: u16) -> bool {
        level == 0 || u32::from(level) == self.levels() - 1
    }
}

/// `Δ = 2·v_ref / 2^B`.
pub fn cell_width(v_ref: f64, bit_depth: u8) -> Result<f64> {
    QuantizerConfig::new(v_ref, bit_depth).map(|c| c.cell_width())
}

/// Variance of an error uniformly distributed over one cell, `Δ²/12`.
pub fn error_variance(delta: f64) -> f64 {
    delta * delta / 12.0
}

pub fn quantize_levels(values: &[f64], cfg: &QuantizerConfig) -> Vec<u16> {
    values.iter().map(|&v| cfg.level_of(v)).collect()
}

pub fn dequantize_levels(levels: &[u16], cfg: &QuantizerConfig) -> Result<Vec<f64>> {
    levels.iter().map(|&k| cfg.value_of(k)).collect()
}

/// Quantize a measurement vector into a payload. Header fields that the
/// quantizer cannot know (segment length, input bit depth, matrix seed,
/// segment index) start out neutral and can be filled in with the `with_*`
/// builders on [`QuantizedPayload`].
pub fn quantize(values: &[f64], cfg: &QuantizerConfig) -> QuantizedPayload {
    let m = values.len() as u32;
    QuantizedPayload {
        header: PayloadHeader {
            n: m,
            m,
            bit_depth: cfg.bit_depth,
            input_bit_depth: cfg.bit_depth,
            v_ref: cfg.v_ref,
            matrix_seed: 0,
            segment_index: 0,
        },
        levels: quantize_levels(values, cfg),
    }
}

pub fn dequantize(payload: &QuantizedPayload) -> Result<Vec<f64>> {
    dequantize_levels(&payload.levels, &payload.config()?)
}

/// Pack `B`-bit level indices LSB-first into bytes. The final byte is padded
/// with zero bits.
pub fn pack_bits(levels: &[u16], bit_depth: u8) -> Result<Vec<u8>> {
    if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
        return Err(Error::InvalidConfig(format!("bit depth {bit_depth} out of range")));
    }
    let width = u32::from(bit_depth);
    let limit = 1u32 << width;
    let mut out = Vec::with_capacity(packed_len(levels.len(), bit_depth));
    let mut acc: u32 = 0;
    let mut filled: u32 = 0;
    for &k in levels {
        if u32::from(k) >= limit {
            return Err(Error::InvalidParameter(format!(
                "level {k} does not fit in {bit_depth} bits"
            )));
        }
        acc |= u32::from(k) << filled;
        filled += width;
        while filled >= 8 {
            out.push((acc & 0xff) as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push((acc & 0xff) as u8);
    }
    Ok(out)
}

pub fn unpack_bits(bytes: &[u8], count: usize, bit_depth: u8) -> Result<Vec<u16>> {
    if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
        return Err(Error::CorruptPayload(format!("bit depth {bit_depth} out of range")));
    }
    let needed = packed_len(count, bit_depth);
    if bytes.len() < needed {
        return Err(Error::CorruptPayload(format!(
            "truncated body: need {needed} bytes, have {}",
            bytes.len()
        )));
    }
    let width = u32::from(bit_depth);
    let mask = (1u32 << width) - 1;
    let mut out = Vec::with_capacity(count);
    let mut acc: u32 = 0;
    let mut filled: u32 = 0;
    let mut bytes = bytes.iter();
    for _ in 0..count {
        while filled < width {
            // length was checked above
            acc |= u32::from(*bytes.next().unwrap()) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u16);
        acc >>= width;
        filled -= width;
    }
    Ok(out)
}

/// `ceil(count·B / 8)`.
pub fn packed_len(count: usize, bit_depth: u8) -> usize {
    (count * usize::from(bit_depth)).div_ceil(8)
}

pub const MAGIC: &[u8; 4] = b"QCS1";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 35;

/// Per-segment header. `v_ref` doubles as the transmitted gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadHeader {
    pub n: u32,
    pub m: u32,
    pub bit_depth: u8,
    pub input_bit_depth: u8,
    pub v_ref: f64,
    pub matrix_seed: u64,
    pub segment_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPayload {
    pub header: PayloadHeader,
    pub levels: Vec<u16>,
}

impl QuantizedPayload {
    pub fn config(&self) -> Result<QuantizerConfig> {
        QuantizerConfig::new(self.header.v_ref, self.header.bit_depth)
            .map_err(|e| Error::CorruptPayload(e.to_string()))
    }

    pub fn with_segment_len(mut self, n: u32) -> Self {
        self.header.n = n;
        self
    }

    pub fn with_input_bit_depth(mut self, bits: u8) -> Self {
        self.header.input_bit_depth = bits;
        self
    }

    pub fn with_matrix_seed(mut self, seed: u64) -> Self {
        self.header.matrix_seed = seed;
        self
    }

    pub fn with_segment_index(mut self, index: u32) -> Self {
        self.header.segment_index = index;
        self
    }

    pub fn body_len(&self) -> usize {
        packed_len(self.levels.len(), self.header.bit_depth)
    }

    /// Serialize to the wire format: magic, version, little-endian header,
    /// then the packed body.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        if h.m as usize != self.levels.len() {
            return Err(Error::DimensionMismatch {
                expected: h.m as usize,
                found: self.levels.len(),
            });
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.body_len());
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.m.to_le_bytes());
        out.push(h.bit_depth);
        out.push(h.input_bit_depth);
        out.extend_from_slice(&h.v_ref.to_le_bytes());
        out.extend_from_slice(&h.matrix_seed.to_le_bytes());
        out.extend_from_slice(&h.segment_index.to_le_bytes());
        out.extend(pack_bits(&self.levels, h.bit_depth)?);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::CorruptPayload(format!(
                "header needs {HEADER_LEN} bytes, have {}",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::CorruptPayload("bad magic".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::CorruptPayload(format!("unsupported version {}", bytes[4])));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let header = PayloadHeader {
            n: u32_at(5),
            m: u32_at(9),
            bit_depth: bytes[13],
            input_bit_depth: bytes[14],
            v_ref: f64::from_bits(u64_at(15)),
            matrix_seed: u64_at(23),
            segment_index: u32_at(31),
        };
        let body = &bytes[HEADER_LEN..];
        let expected = packed_len(header.m as usize, header.bit_depth);
        if body.len() != expected {
            return Err(Error::CorruptPayload(format!(
                "body is {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let levels = unpack_bits(body, header.m as usize, header.bit_depth)?;
        let payload = Self { header, levels };
        payload.config()?;
        Ok(payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(v_ref: f64, b: u8) -> QuantizerConfig {
        QuantizerConfig::new(v_ref, b).unwrap()
    }

    #[test]
    fn cell_width_examples() {
        assert_eq!(cell_width(1.0, 2).unwrap(), 0.5);
        assert_eq!(cell_width(1.0, 1).unwrap(), 1.0);
        assert!((cell_width(0.35, 2).unwrap() - 0.175).abs() < 1e-15);
        assert!(cell_width(0.0, 2).is_err());
        assert!(cell_width(-1.0, 2).is_err());
        assert!(cell_width(1.0, 0).is_err());
        assert!(cell_width(1.0, 17).is_err());
    }

    #[test]
    fn quantize_examples() {
        let c = cfg(1.0, 2);
        assert_eq!(c.levels(), 4);
        assert_eq!(quantize(&[0.3], &c).levels, vec![2]);
        assert_eq!(quantize(&[-1.2], &c).levels, vec![0]);
        assert_eq!(quantize(&[0.5], &c).levels, vec![3]);
        // rails: -v_ref is the bottom edge, +v_ref belongs to the closed top cell
        assert_eq!(quantize(&[-1.0, 1.0, 7.0], &c).levels, vec![0, 3, 3]);
    }

    #[test]
    fn dequantize_examples() {
        let c = cfg(1.0, 2);
        assert_eq!(c.value_of(2).unwrap(), 0.25);
        assert_eq!(c.value_of(0).unwrap(), -0.75);
        assert!(matches!(c.value_of(4), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn error_variance_examples() {
        assert!((error_variance(0.5) - 0.5 * 0.5 / 12.0).abs() < 1e-18);
        assert!((error_variance(1.0) - 0.083_333_333_333_333_33).abs() < 1e-15);
    }

    #[test]
    fn pack_examples() {
        assert_eq!(pack_bits(&[3, 0, 1, 2], 2).unwrap(), vec![0x93]);
        assert_eq!(pack_bits(&[1], 2).unwrap(), vec![0x01]);
        assert!(pack_bits(&[4], 2).is_err());
        assert_eq!(unpack_bits(&[0x93], 4, 2).unwrap(), vec![3, 0, 1, 2]);
        assert!(matches!(unpack_bits(&[0x93], 5, 2), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn wire_format_layout() {
        let c = cfg(0.75, 2);
        let p = quantize(&[0.3, -0.1, 0.8, -0.9], &c)
            .with_segment_len(8)
            .with_input_bit_depth(12)
            .with_matrix_seed(0x0102_0304_0506_0708)
            .with_segment_index(3);
        let bytes = p.to_bytes().unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 1);
        assert_eq!(&bytes[..5], b"QCS1\x01");
        assert_eq!(&bytes[5..9], &8u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &4u32.to_le_bytes());
        assert_eq!(bytes[13], 2);
        assert_eq!(bytes[14], 12);
        assert_eq!(&bytes[15..23], &0.75f64.to_le_bytes());
        assert_eq!(&bytes[23..31], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(&bytes[31..35], &3u32.to_le_bytes());
        assert_eq!(QuantizedPayload::from_bytes(&bytes).unwrap(), p);

        assert!(QuantizedPayload::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(QuantizedPayload::from_bytes(&bad).is_err());
    }

    #[test]
    fn one_bit_round_trip_uses_both_levels() {
        let c = cfg(1.0, 1);
        let p = quantize(&[-0.2, 0.2], &c);
        assert_eq!(dequantize(&p).unwrap(), vec![-0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn mid_point_error_bounded(v in -0.999f64..0.999, b in 2u8..=16) {
            let c = cfg(1.0, b);
            let back = c.value_of(c.level_of(v)).unwrap();
            prop_assert!((back - v).abs() <= c.cell_width() / 2.0 + 1e-15);
            prop_assert!(back > -1.0 && back < 1.0);
        }

        #[test]
        fn quantize_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, bits in 1u8..=8) {
            let c = cfg(1.0, bits);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.level_of(lo) <= c.level_of(hi));
        }

        #[test]
        fn pack_unpack_bijection(bits in 1u8..=16, raw in proptest::collection::vec(any::<u16>(), 0..200)) {
            let mask = ((1u32 << bits) - 1) as u16;
            let levels: Vec<u16> = raw.iter().map(|k| k & mask).collect();
            let packed = pack_bits(&levels, bits).unwrap();
            prop_assert_eq!(packed.len(), packed_len(levels.len(), bits));
            prop_assert_eq!(unpack_bits(&packed, levels.len(), bits).unwrap(), levels);
        }
    }
}
