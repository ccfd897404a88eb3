//! Two-stage data compression for physiological telemonitoring: sparse
//! binary compressed sensing followed by coarse uniform quantization, and
//! Bayesian de-quantization (BDQ) to recover the signal on the receiver.
//!
//! The modules follow the data path:
//!
//! * [`quantizer`]: uniform mid-point quantizer and the packed wire format.
//! * [`sensing`]: sparse binary sensing matrices and bit accounting.
//! * [`bdq`]: the nested EM recovery algorithm.
//! * [`metrics`]: RSNR/ARSNR, 1-D SSIM and heart-rate error statistics.
//! * [`signals`]: synthetic datasets, segmentation and CSV I/O.
//! * [`hr`]: a spectral-peak heart-rate estimator.
//! * [`cli`]: experiment configuration and the `qcs` subcommands.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdq;
pub mod cli;
pub mod error;
pub mod hr;
pub mod metrics;
pub mod quantizer;
pub mod sensing;
pub mod signals;

pub use error::{Error, Result};
