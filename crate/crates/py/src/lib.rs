//! Python bindings for `qcs-core`.
//!
//! Vectors cross the boundary as Python lists of floats, payloads as
//! `bytes` in the wire format, and recovery results as plain dicts.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use qcs_core::bdq::{self, BdqOptions};
use qcs_core::error::Error;
use qcs_core::quantizer::{self, QuantizedPayload};
use qcs_core::sensing::{self, MeasurementOperator};
use qcs_core::{hr, metrics, signals};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::InvalidConfig(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::CorruptPayload(_)
        | Error::TooShort { .. }
        | Error::Parse { .. }
        | Error::UndefinedMetric(_) => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Uniform mid-point quantizer on `[-v_ref, v_ref]` with `2^bit_depth` levels.
#[pyclass(name = "QuantizerConfig", frozen)]
struct PyQuantizerConfig {
    inner: quantizer::QuantizerConfig,
}

#[pymethods]
impl PyQuantizerConfig {
    #[new]
    fn new(v_ref: f64, bit_depth: u8) -> PyResult<Self> {
        Ok(Self {
            inner: quantizer::QuantizerConfig::new(v_ref, bit_depth).map_err(to_py)?,
        })
    }

    #[getter]
    fn v_ref(&self) -> f64 {
        self.inner.v_ref()
    }

    #[getter]
    fn bit_depth(&self) -> u8 {
        self.inner.bit_depth()
    }

    #[getter]
    fn levels(&self) -> u32 {
        self.inner.levels()
    }

    #[getter]
    fn cell_width(&self) -> f64 {
        self.inner.cell_width()
    }

    /// Level index of every value.
    fn quantize(&self, values: Vec<f64>) -> Vec<u16> {
        quantizer::quantize_levels(&values, &self.inner)
    }

    /// Cell mid-points of level indices.
    fn dequantize(&self, levels: Vec<u16>) -> PyResult<Vec<f64>> {
        quantizer::dequantize_levels(&levels, &self.inner).map_err(to_py)
    }

    /// Wire-format payload for a measurement vector.
    #[pyo3(signature = (values, segment_len=None, input_bit_depth=None, matrix_seed=0, segment_index=0))]
    fn encode<'py>(
        &self,
        py: Python<'py>,
        values: Vec<f64>,
        segment_len: Option<u32>,
        input_bit_depth: Option<u8>,
        matrix_seed: u64,
        segment_index: u32,
    ) -> PyResult<Bound<'py, PyBytes>> {
        let mut payload = quantizer::quantize(&values, &self.inner)
            .with_matrix_seed(matrix_seed)
            .with_segment_index(segment_index);
        if let Some(n) = segment_len {
            payload = payload.with_segment_len(n);
        }
        if let Some(bits) = input_bit_depth {
            payload = payload.with_input_bit_depth(bits);
        }
        Ok(PyBytes::new(py, &payload.to_bytes().map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantizerConfig(v_ref={}, bit_depth={})",
            self.inner.v_ref(),
            self.inner.bit_depth()
        )
    }
}

/// Decode a wire-format payload into its header fields and mid-point values.
#[pyfunction]
fn decode_payload<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    let payload = QuantizedPayload::from_bytes(data).map_err(to_py)?;
    let h = payload.header;
    let d = PyDict::new(py);
    d.set_item("n", h.n)?;
    d.set_item("m", h.m)?;
    d.set_item("bit_depth", h.bit_depth)?;
    d.set_item("input_bit_depth", h.input_bit_depth)?;
    d.set_item("v_ref", h.v_ref)?;
    d.set_item("matrix_seed", h.matrix_seed)?;
    d.set_item("segment_index", h.segment_index)?;
    d.set_item("levels", payload.levels.clone())?;
    d.set_item("values", quantizer::dequantize(&payload).map_err(to_py)?)?;
    Ok(d)
}

#[pyfunction]
fn pack_bits<'py>(py: Python<'py>, levels: Vec<u16>, bit_depth: u8) -> PyResult<Bound<'py, PyBytes>> {
    Ok(PyBytes::new(py, &quantizer::pack_bits(&levels, bit_depth).map_err(to_py)?))
}

#[pyfunction]
fn unpack_bits(data: &[u8], count: usize, bit_depth: u8) -> PyResult<Vec<u16>> {
    quantizer::unpack_bits(data, count, bit_depth).map_err(to_py)
}

/// Sparse binary sensing matrix with two ones per column and full row rank.
#[pyclass(name = "SensingMatrix", frozen)]
struct PySensingMatrix {
    inner: sensing::SparseBinaryMatrix,
}

#[pymethods]
impl PySensingMatrix {
    #[new]
    fn new(rows: usize, cols: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: sensing::SparseBinaryMatrix::generate(rows, cols, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }

    /// Row indices of the two ones in each column.
    fn column_supports(&self) -> Vec<(usize, usize)> {
        self.inner.column_supports().iter().map(|s| (s[0], s[1])).collect()
    }

    /// `y = Φx`.
    fn compress(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        sensing::compress(&self.inner, &x).map_err(to_py)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.inner.to_dense();
        (0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SensingMatrix(rows={}, cols={}, seed={})",
            self.inner.rows(),
            self.inner.cols(),
            self.inner.seed()
        )
    }
}

/// Run the de-quantization loop on mid-point measurements `z`.
///
/// `blind=True` skips the quantization-error estimate. `v_ref` enables the
/// one-sided error model on rail measurements.
#[pyfunction]
#[pyo3(signature = (z, matrix, delta, v_ref=None, lam=1e-3, max_iter=128, tol=1e-8, saturation_aware=true, blind=false))]
#[allow(clippy::too_many_arguments)]
fn recover<'py>(
    py: Python<'py>,
    z: Vec<f64>,
    matrix: &PySensingMatrix,
    delta: f64,
    v_ref: Option<f64>,
    lam: f64,
    max_iter: usize,
    tol: f64,
    saturation_aware: bool,
    blind: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = BdqOptions {
        lambda: lam,
        max_iter,
        tol,
        saturation_aware,
        v_ref,
        delta,
        ..BdqOptions::default()
    };
    let phi = &matrix.inner;
    let result = py
        .detach(|| {
            if blind {
                bdq::recover_blind(&z, phi, &opts)
            } else {
                bdq::recover(&z, phi, &opts)
            }
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    let diag = &result.diagnostics;
    d.set_item("x_hat", result.x_hat.clone())?;
    d.set_item("e_hat", result.e_hat.clone())?;
    d.set_item("iterations", diag.iterations)?;
    d.set_item("converged", diag.converged)?;
    d.set_item("nll_trace", diag.nll_trace.clone())?;
    d.set_item("gamma_trace", diag.gamma_trace.clone())?;
    d.set_item("final_gamma", diag.final_gamma)?;
    d.set_item("saturated", diag.saturated)?;
    d.set_item("wall_time_s", diag.wall_time_s)?;
    Ok(d)
}

#[pyfunction]
fn rsnr(x: Vec<f64>, x_hat: Vec<f64>) -> PyResult<f64> {
    metrics::rsnr(&x, &x_hat).map_err(to_py)
}

/// Average RSNR over `(x, x_hat)` pairs.
#[pyfunction]
fn arsnr(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<f64> {
    metrics::arsnr(pairs.iter().map(|(x, h)| (x.as_slice(), h.as_slice()))).map_err(to_py)
}

#[pyfunction]
fn ssim(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::ssim_1d(&x, &y).map_err(to_py)
}

/// Error1, SD_BPM and Pearson r of estimates against ground truth.
#[pyfunction]
fn hr_report<'py>(py: Python<'py>, est: Vec<f64>, truth: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::HrReport::new(&est, &truth).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("error1", r.error1)?;
    d.set_item("sd_bpm", r.sd_bpm)?;
    d.set_item("pearson", r.pearson)?;
    d.set_item("slope", r.fit.slope)?;
    d.set_item("intercept", r.fit.intercept)?;
    d.set_item("r_squared", r.fit.r_squared)?;
    Ok(d)
}

#[pyfunction]
fn compression_ratio(m: usize, n: usize) -> f64 {
    sensing::compression_ratio(m, n)
}

#[pyfunction]
fn bit_compression_ratio(m: usize, n: usize, bits: u8, input_bits: u8) -> f64 {
    sensing::bit_compression_ratio(m, n, bits, input_bits)
}

/// `count` unit-norm AR(1) segments of length `n`.
#[pyfunction]
fn synth_ar1(r: f64, n: usize, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let stream = signals::synth_ar1(r, n, count, seed).map_err(to_py)?;
    Ok(stream.segments.into_iter().map(|s| s.samples).collect())
}

/// Sliding-window BPM estimates as `(window_start_s, bpm or None)` pairs.
#[pyfunction]
#[pyo3(signature = (ppg, fs, window_s=8.0, step_s=2.0))]
fn estimate_bpm(ppg: Vec<f64>, fs: f64, window_s: f64, step_s: f64) -> PyResult<Vec<(f64, Option<f64>)>> {
    let track = hr::estimate_bpm(&ppg, fs, window_s, step_s).map_err(to_py)?;
    Ok(track.window_start_s.into_iter().zip(track.estimates).collect())
}

#[pymodule]
fn qcs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantizerConfig>()?;
    m.add_class::<PySensingMatrix>()?;
    m.add_function(wrap_pyfunction!(decode_payload, m)?)?;
    m.add_function(wrap_pyfunction!(pack_bits, m)?)?;
    m.add_function(wrap_pyfunction!(unpack_bits, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(rsnr, m)?)?;
    m.add_function(wrap_pyfunction!(arsnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(hr_report, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bit_compression_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(synth_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_bpm, m)?)?;
    m.add("HEADER_LEN", quantizer::HEADER_LEN)?;
    Ok(())
}

