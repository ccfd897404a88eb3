//! The `qcs` command line: dataset synthesis, compression, recovery,
//! scoring and the (M, B) sweep.
//!
//! Settings come from an optional flat config file (`--config`) and are then
//! overridden by flags. Exit status is 0 on success, 1 for configuration
//! errors and 2 for data errors.

pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{Algo, ExperimentConfig, SynthKind, SynthSpec};
pub use pipeline::{
    decode, encode_dataset, encode_segment, evaluate, evaluate_datasets, CodecSettings, Decoded, Encoded, Evaluation, Sidecar,
};

use crate::error::{Error, Result};
use crate::hr::estimate_bpm;
use crate::metrics::HrReport;
use crate::signals::{bpm_path, load_csv, load_track, save_csv, synth_ar1, synth_ppg, Channel, Dataset};
use pipeline::csv_io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const SWEEP_COLUMNS: [&str; 13] = [
    "algo", "M", "B", "MB", "sidecar_bits", "CR", "CR_b", "ARSNR", "SSIM", "Error1", "SD_BPM", "pearson", "status",
];

#[derive(Debug, Parser)]
#[command(name = "qcs", version, about = "Quantized compressed sensing with Bayesian de-quantization")]
pub struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Segment, measure and quantize a dataset into payload files.
    Compress(CompressArgs),
    /// Rebuild a dataset from payloads and sidecar.
    Recover(RecoverArgs),
    /// Score a recovered dataset against its reference.
    Metrics(MetricsArgs),
    /// Run the full (M, B) grid for every algorithm arm.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
    #[arg(long)]
    pub duration: Option<String>,
    /// `const:<bpm>` or `ramp:<start>:<end>`.
    #[arg(long)]
    pub bpm_profile: Option<String>,
    #[arg(long)]
    pub artifact_level: Option<String>,
    /// Generation rate before decimation.
    #[arg(long)]
    pub fs: Option<String>,
    #[arg(long)]
    pub decimate: Option<String>,
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub segments: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output CSV path.
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct CodecArgs {
    #[arg(long)]
    pub n: Option<String>,
    /// One value, or a comma-separated list for `sweep`.
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub bi: Option<String>,
    #[arg(long)]
    pub vref_frac: Option<String>,
    /// Seed of the measurement matrix.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub per_segment_matrix: bool,
    /// Comma-separated channel names; all channels when absent.
    #[arg(long)]
    pub channels: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    /// `bdq` or `bdq-blind`; a comma-separated list for `sweep`.
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    /// Treat rail measurements as two-sided like all others.
    #[arg(long)]
    pub no_saturation: bool,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Output directory for payloads and sidecar.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Directory written by `compress`.
    #[arg(long)]
    pub payloads: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Original dataset, read only after recovery to score it.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub recovered: PathBuf,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Map an error to the process exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::GenerationFailure { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&mut cfg, a),
        Command::Compress(a) => cmd_compress(&mut cfg, a),
        Command::Recover(a) => cmd_recover(&mut cfg, a),
        Command::Metrics(a) => cmd_metrics(&mut cfg, a),
        Command::Sweep(a) => cmd_sweep(&mut cfg, a),
    }
}

fn apply(cfg: &mut ExperimentConfig, pairs: &[(&str, &Option<String>)]) -> Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(())
}

fn apply_codec(cfg: &mut ExperimentConfig, a: &CodecArgs) -> Result<()> {
    apply(
        cfg,
        &[
            ("n", &a.n),
            ("m", &a.m),
            ("b", &a.b),
            ("bi", &a.bi),
            ("vref_frac", &a.vref_frac),
            ("seed", &a.seed),
            ("channels", &a.channels),
        ],
    )?;
    if a.per_segment_matrix {
        cfg.per_segment_matrix = true;
    }
    Ok(())
}

fn apply_solver(cfg: &mut ExperimentConfig, a: &SolverArgs) -> Result<()> {
    apply(
        cfg,
        &[("algo", &a.algo), ("lambda", &a.lambda), ("max_iter", &a.max_iter), ("tol", &a.tol)],
    )?;
    if a.no_saturation {
        cfg.saturation_aware = false;
    }
    Ok(())
}

fn single<T: Copy + std::fmt::Debug>(name: &str, list: &[T]) -> Result<T> {
    match list {
        [v] => Ok(*v),
        _ => Err(Error::InvalidConfig(format!("{name} takes exactly one value here, got {list:?}"))),
    }
}

/// Build the synthetic dataset described by `spec`.
pub fn synthesize(spec: &SynthSpec, n: usize) -> Result<Dataset> {
    if spec.decimate == 0 {
        return Err(Error::InvalidConfig("decimate must be at least 1".into()));
    }
    let rate = spec.fs / spec.decimate as f64;
    match spec.kind {
        SynthKind::Ppg => synth_ppg(spec.duration_s, spec.fs, spec.bpm_profile, spec.artifact_level, spec.seed)?
            .decimated(spec.decimate),
        SynthKind::Ar1 => {
            let stream = synth_ar1(spec.r, n, spec.segments, spec.seed)?;
            let samples = stream.segments.iter().flat_map(|s| s.samples.iter().copied()).collect();
            Dataset::new(
                vec![Channel {
                    name: "ar1".into(),
                    samples,
                }],
                rate,
                crate::signals::DEFAULT_INPUT_BITS,
            )
        }
    }
}

fn dataset_for(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        Some(path) => load_with_track(path),
        None => synthesize(&cfg.synth, cfg.n),
    }
}

/// Load a dataset and, when present, its ground-truth BPM side file.
pub fn load_with_track(path: &Path) -> Result<Dataset> {
    let mut ds = load_csv(path)?;
    let track = bpm_path(path);
    if ds.bpm_true.is_none() && track.exists() {
        ds.bpm_true = Some(load_track(&track)?);
    }
    Ok(ds)
}

fn out_dir(cfg: &ExperimentConfig, flag: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag.clone().unwrap_or_else(|| cfg.out.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_synth(cfg: &mut ExperimentConfig, a: &SynthArgs) -> Result<()> {
    if let Some(kind) = a.kind {
        cfg.synth.kind = kind;
    }
    apply(
        cfg,
        &[
            ("duration", &a.duration),
            ("bpm_profile", &a.bpm_profile),
            ("artifact_level", &a.artifact_level),
            ("fs", &a.fs),
            ("decimate", &a.decimate),
            ("r", &a.r),
            ("segments", &a.segments),
            ("n", &a.n),
            ("synth_seed", &a.seed),
        ],
    )?;
    let ds = synthesize(&cfg.synth, cfg.n)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_csv(&ds, &a.out)?;
    println!("wrote {} samples x {} channels at {} Hz to {}", ds.len(), ds.channels.len(), ds.sample_rate, a.out.display());
    Ok(())
}

fn cmd_compress(cfg: &mut ExperimentConfig, a: &CompressArgs) -> Result<()> {
    apply_codec(cfg, &a.codec)?;
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(d.clone());
    }
    cfg.validate()?;
    let path = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::InvalidConfig("compress needs --dataset".into()))?;
    let m = single("m", &cfg.m_list)?;
    let b = single("b", &cfg.b_list)?;
    let ds = load_csv(&path)?;
    let encoded = encode_dataset(&ds, &cfg.channels, &CodecSettings::from_config(cfg, m, b))?;
    let dir = out_dir(cfg, &a.out)?;
    encoded.write(&dir)?;
    let s = &encoded.sidecar;
    println!(
        "segments={} CR={} CR_b={} payload_bytes_per_segment={} sidecar_bits_per_segment={}",
        s.segments.len(),
        s.compression_ratio,
        s.bit_compression_ratio,
        crate::quantizer::packed_len(s.m, s.bit_depth),
        s.overhead_bits_per_segment
    );
    Ok(())
}

fn cmd_recover(cfg: &mut ExperimentConfig, a: &RecoverArgs) -> Result<()> {
    apply_solver(cfg, &a.solver)?;
    cfg.validate()?;
    let algo = single("algo", &cfg.algos)?;
    let encoded = Encoded::read(&a.payloads)?;
    let decoded = decode(&encoded, algo, cfg)?;
    let dir = out_dir(cfg, &a.out)?;
    save_csv(&decoded.dataset, &dir.join("recovered.csv"))?;
    write_json(&decoded.outcomes, &dir.join("diagnostics.json"))?;
    if let Some(reference) = &a.reference {
        let original = load_csv(reference)?;
        let eval = evaluate(&original, &decoded, encoded.sidecar.n)?;
        eval.write_csv(&dir.join("report.csv"))?;
        let record = format!(
            "algo={algo}\nsegments={}\nfailed={}\narsnr_db={}\nmean_ssim={}\n",
            eval.scores.len(),
            decoded.failures(),
            eval.arsnr_db,
            eval.mean_ssim
        );
        fs::write(dir.join("report.txt"), &record)?;
        print!("{record}");
    }
    Ok(())
}

/// HR metrics of `recovered`'s ppg channel against the reference track, if
/// both exist.
pub fn hr_metrics(recovered: &Dataset, truth: Option<&[(f64, f64)]>, cfg: &ExperimentConfig) -> Option<Result<HrReport>> {
    let truth = truth?;
    let ppg = recovered.channel("ppg")?;
    Some(estimate_bpm(&ppg.samples, recovered.sample_rate, cfg.hr_window_s, cfg.hr_step_s).and_then(|t| t.report(truth)))
}

fn cmd_metrics(cfg: &mut ExperimentConfig, a: &MetricsArgs) -> Result<()> {
    apply(cfg, &[("n", &a.n), ("channels", &a.channels)])?;
    cfg.validate()?;
    let reference = load_with_track(&a.reference)?;
    let recovered = load_csv(&a.recovered)?;
    let eval = pipeline::evaluate_datasets(&reference, &recovered, &cfg.channels, cfg.n)?;
    let mut record = format!(
        "segments={}\narsnr_db={}\nmean_ssim={}\n",
        eval.scores.len(),
        eval.arsnr_db,
        eval.mean_ssim
    );
    if let Some(hr) = hr_metrics(&recovered, reference.bpm_true.as_deref(), cfg) {
        record.push_str(&hr?.to_record());
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        eval.write_csv(&dir.join("report.csv"))?;
        fs::write(dir.join("report.txt"), &record)?;
    }
    print!("{record}");
    Ok(())
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algo: Algo,
    pub m: usize,
    pub b: u8,
    pub mb: usize,
    pub sidecar_bits: u32,
    pub cr: f64,
    pub cr_b: f64,
    pub arsnr: f64,
    pub ssim: f64,
    pub error1: f64,
    pub sd_bpm: f64,
    pub pearson: f64,
    pub status: String,
}

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.algo.to_string(),
            self.m.to_string(),
            self.b.to_string(),
            self.mb.to_string(),
            self.sidecar_bits.to_string(),
            self.cr.to_string(),
            self.cr_b.to_string(),
            self.arsnr.to_string(),
            self.ssim.to_string(),
            self.error1.to_string(),
            self.sd_bpm.to_string(),
            self.pearson.to_string(),
            self.status.clone(),
        ]
    }
}

/// Run the grid `algos × m_list × b_list` on `ds`. Failures are recorded in
/// the row's status and the sweep moves on.
pub fn sweep(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &algo in &cfg.algos {
        for &m in &cfg.m_list {
            for &b in &cfg.b_list {
                let settings = CodecSettings::from_config(cfg, m, b);
                let mut row = SweepRow {
                    algo,
                    m,
                    b,
                    mb: m * b as usize,
                    sidecar_bits: pipeline::SIDECAR_BITS_PER_SEGMENT,
                    cr: crate::sensing::compression_ratio(m, cfg.n),
                    cr_b: crate::sensing::bit_compression_ratio(m, cfg.n, b, cfg.input_bits),
                    arsnr: f64::NAN,
                    ssim: f64::NAN,
                    error1: f64::NAN,
                    sd_bpm: f64::NAN,
                    pearson: f64::NAN,
                    status: "ok".into(),
                };
                let result = encode_dataset(ds, &cfg.channels, &settings)
                    .and_then(|enc| decode(&enc, algo, cfg))
                    .and_then(|dec| evaluate(ds, &dec, cfg.n).map(|ev| (dec, ev)));
                match result {
                    Ok((dec, eval)) => {
                        row.arsnr = eval.arsnr_db;
                        row.ssim = eval.mean_ssim;
                        if dec.failures() > 0 {
                            row.status = format!("partial: {} segment(s) failed", dec.failures());
                        }
                        match hr_metrics(&dec.dataset, ds.bpm_true.as_deref(), cfg) {
                            Some(Ok(hr)) => {
                                row.error1 = hr.error1;
                                row.sd_bpm = hr.sd_bpm;
                                row.pearson = hr.pearson;
                            }
                            Some(Err(e)) => row.status = format!("hr failed: {e}"),
                            None => {}
                        }
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                log::info!("{algo} M={m} B={b}: ARSNR={} ({})", row.arsnr, row.status);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(SWEEP_COLUMNS).map_err(csv_io)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(cfg: &mut ExperimentConfig, a: &SweepArgs) -> Result<()> {
    apply_codec(cfg, &a.codec)?;
    apply_solver(cfg, &a.solver)?;
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(d.clone());
    }
    cfg.validate()?;
    let ds = dataset_for(cfg)?;
    let rows = sweep(&ds, cfg)?;
    let dir = out_dir(cfg, &a.out)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(&rows, &path)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "wrote {} rows to {}", rows.len(), path.display())?;
    Ok(())
}
