//! Command-line front end: `convert`, `verify`, `bench` and `stats`.
//!
//! Every command writes its result to the given sink so the commands can be
//! driven from tests without spawning the binary. Exit codes: 0 success,
//! 1 verification failure, 2 usage or input error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehyb::pipeline::{build, BuildOptions, Built};
use ehyb::{
    coo_to_csr, cut_metrics, footprint_stats, load_partition_file, random_balanced_partition, read_ehyb_container,
    spmv_csr, spmv_ehyb, spmv_ehyb_user, traffic_model, write_ehyb_container, AnyEhyb, CooMatrix, DeviceProfile,
    EhybMatrix, ExecutionConfig, Footprint, Scalar, Scheduling, TrafficModel,
};
use serde::Serialize;

pub mod lcg;
pub mod report;

use report::BenchRow;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ehyb::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "ehyb", version, about = "Convert, verify and benchmark sparse matrices in the EHYB format")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a Matrix Market file to an EHYB container.
    Convert(ConvertArgs),
    /// Compare the EHYB kernel against the CSR reference on seeded vectors.
    Verify(VerifyArgs),
    /// Time the EHYB and CSR kernels.
    Bench(BenchArgs),
    /// Print partition and layout statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Number of simulated processors.
    #[arg(long = "P", default_value_t = 80)]
    pub processors: usize,
    #[arg(long, default_value_t = 32)]
    pub warp: usize,
    /// Per-block cache budget in bytes.
    #[arg(long = "shm-bytes", visible_alias = "shm", default_value_t = 49152)]
    pub shm_bytes: usize,
    /// Externally computed partition, one 0-based part id per line.
    #[arg(long = "parts-file")]
    pub parts_file: Option<PathBuf>,
    /// Seed for the partitioner tie-break (and for `verify` vectors).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn from_tau(tau: usize) -> Result<Self, CliError> {
        match tau {
            4 => Ok(Precision::F32),
            8 => Ok(Precision::F64),
            t => Err(CliError::Usage(format!("--tau must be 4 or 8, got {t}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    /// Output container; defaults to the input path with an `.ehyb` extension.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Bytes per value: 4 (single) or 8 (double).
    #[arg(long, default_value_t = 8)]
    pub tau: usize,
    #[command(flatten)]
    pub build: BuildArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Matrix Market file, or an EHYB container.
    pub input: PathBuf,
    /// Container to test against the Matrix Market input instead of a
    /// freshly built one.
    #[arg(long)]
    pub container: Option<PathBuf>,
    /// Number of seeded input vectors.
    #[arg(long, default_value_t = 8)]
    pub vectors: u64,
    /// Maximum relative error; defaults to 1e-12 (double) or 1e-5 (single).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub tau: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub build: BuildArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub out: OutputFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub build: BuildArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub tau: usize,
    /// Random balanced partitions averaged for the baseline.
    #[arg(long, default_value_t = 10)]
    pub baseline_samples: u64,
    #[command(flatten)]
    pub build: BuildArgs,
}

/// Run a parsed command, writing its output to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Convert(a) => convert(&a, out),
        Command::Verify(a) => verify(&a, out),
        Command::Bench(a) => bench(&a, out),
        Command::Stats(a) => stats(&a, out),
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

pub fn load_matrix(path: &Path) -> Result<CooMatrix, CliError> {
    Ok(ehyb::parse_matrix_market(BufReader::new(open(path)?))?)
}

fn is_container(path: &Path) -> Result<bool, CliError> {
    let mut magic = [0u8; 4];
    let mut f = open(path)?;
    let n = f.read(&mut magic)?;
    Ok(n == 4 && &magic == ehyb::container::MAGIC)
}

fn load_container(path: &Path) -> Result<AnyEhyb, CliError> {
    Ok(read_ehyb_container(BufReader::new(open(path)?))?)
}

fn build_options(a: &BuildArgs, m: &CooMatrix) -> Result<BuildOptions, CliError> {
    let profile = DeviceProfile::new(a.processors, a.warp, a.shm_bytes)?;
    let partition = match &a.parts_file {
        Some(p) => Some(load_partition_file(BufReader::new(open(p)?), m.n_rows())?),
        None => None,
    };
    Ok(BuildOptions { profile, seed: a.seed, partition, ..Default::default() })
}

fn worker_count(w: Option<usize>) -> Result<usize, CliError> {
    match w {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => Ok(w),
        None => Ok(ExecutionConfig::default().worker_count),
    }
}

#[derive(Debug, Serialize)]
pub struct ConvertSummary {
    pub output: PathBuf,
    pub precision: &'static str,
    pub dimension: usize,
    pub nnz: usize,
    pub k: usize,
    pub n_parts: usize,
    pub vec_cache_size: usize,
    pub padded_dimension: usize,
    pub inner_fraction: f64,
    pub ell_nnz: usize,
    pub er_nnz: usize,
    pub er_rows: usize,
    pub partition_seconds: f64,
    pub assemble_seconds: f64,
}

fn summarize<T: Scalar>(b: &Built<T>, output: PathBuf) -> ConvertSummary {
    let e = &b.matrix;
    ConvertSummary {
        output,
        precision: if T::TAU == 4 { "f32" } else { "f64" },
        dimension: e.dimension(),
        nnz: e.nnz(),
        k: e.params.k,
        n_parts: e.n_parts(),
        vec_cache_size: e.params.vec_cache_size,
        padded_dimension: e.padded_dimension(),
        inner_fraction: b.cut.inner_fraction,
        ell_nnz: e.nnz_ell(),
        er_nnz: e.nnz_er(),
        er_rows: e.plan.n_er_rows(),
        partition_seconds: b.timings.partition.as_secs_f64(),
        assemble_seconds: b.timings.assemble.as_secs_f64(),
    }
}

fn convert(a: &ConvertArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_matrix(&a.input)?;
    let opts = build_options(&a.build, &m)?;
    let output = a.output.clone().unwrap_or_else(|| a.input.with_extension("ehyb"));
    let create = |p: &Path| File::create(p).map_err(|source| CliError::File { path: p.to_path_buf(), source });
    let summary = match Precision::from_tau(a.tau)? {
        Precision::F32 => {
            let b = build::<f32>(&m, &opts)?;
            write_ehyb_container(&b.matrix, BufWriter::new(create(&output)?))?;
            summarize(&b, output)
        }
        Precision::F64 => {
            let b = build::<f64>(&m, &opts)?;
            write_ehyb_container(&b.matrix, BufWriter::new(create(&output)?))?;
            summarize(&b, output)
        }
    };
    serde_json::to_writer_pretty(&mut *out, &summary)?;
    writeln!(out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub precision: &'static str,
    pub vectors: u64,
    pub first_seed: u64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub worst_seed: u64,
    pub pass: bool,
}

/// `max |y - y_ref| / max |y_ref|`, or the absolute error when the
/// reference is zero.
pub fn relative_error(y: &[f64], y_ref: &[f64]) -> f64 {
    let diff = y.iter().zip(y_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = y_ref.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn verify_with<T: Scalar>(
    e: &EhybMatrix<T>,
    oracle: &CooMatrix,
    a: &VerifyArgs,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if oracle.n_rows() != e.dimension() || !oracle.is_square() {
        return Err(CliError::Usage(format!(
            "container dimension {} does not match matrix {}x{}",
            e.dimension(),
            oracle.n_rows(),
            oracle.n_cols()
        )));
    }
    let csr = coo_to_csr(oracle);
    let cfg = ExecutionConfig::new(worker_count(a.workers)?, Scheduling::Stealing);
    let tolerance = a.tolerance.unwrap_or(if T::TAU == 4 { 1e-5 } else { 1e-12 });
    let mut worst = (0.0f64, a.build.seed);
    for d in 0..a.vectors {
        let seed = a.build.seed.wrapping_add(d);
        let x: Vec<T> = lcg::vector(e.dimension(), seed).into_iter().map(T::from_f64).collect();
        let x_ref: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        let y: Vec<f64> = spmv_ehyb_user(e, &x, &cfg)?.into_iter().map(|v| v.to_f64()).collect();
        let err = relative_error(&y, &spmv_csr(&csr, &x_ref)?);
        // NaN compares false, so treat it as the worst possible error
        if err.is_nan() || err > worst.0 || d == 0 {
            worst = (if err.is_nan() { f64::INFINITY } else { err }, seed);
        }
    }
    let pass = worst.0 <= tolerance;
    let report = VerifyReport {
        precision: if T::TAU == 4 { "f32" } else { "f64" },
        vectors: a.vectors,
        first_seed: a.build.seed,
        tolerance,
        max_rel_error: worst.0,
        worst_seed: worst.1,
        pass,
    };
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    if pass {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "verification failed: seed {} has relative error {:e} above tolerance {:e}",
            worst.1, worst.0, tolerance
        );
        Ok(EXIT_VERIFY_FAILED)
    }
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if a.vectors == 0 {
        return Err(CliError::Usage("--vectors must be at least 1".into()));
    }
    if is_container(&a.input)? {
        if a.container.is_some() {
            return Err(CliError::Usage("--container is only valid with a Matrix Market input".into()));
        }
        // without the source matrix, check the kernel against the stored entries
        return match load_container(&a.input)? {
            AnyEhyb::Single(e) => verify_with(&e, &e.to_coo(), a, out),
            AnyEhyb::Double(e) => verify_with(&e, &e.to_coo(), a, out),
        };
    }
    let m = load_matrix(&a.input)?;
    m.ensure_square()?;
    if let Some(c) = &a.container {
        return match load_container(c)? {
            AnyEhyb::Single(e) => verify_with(&e, &m, a, out),
            AnyEhyb::Double(e) => verify_with(&e, &m, a, out),
        };
    }
    let opts = build_options(&a.build, &m)?;
    match Precision::from_tau(a.tau)? {
        Precision::F32 => verify_with(&build::<f32>(&m, &opts)?.matrix, &m, a, out),
        Precision::F64 => verify_with(&build::<f64>(&m, &opts)?.matrix, &m, a, out),
    }
}

struct Timing {
    median: f64,
    min: f64,
}

fn time_reps(reps: usize, warmup: usize, mut f: impl FnMut() -> Result<(), CliError>) -> Result<Timing, CliError> {
    for _ in 0..warmup {
        f()?;
    }
    let mut t: Vec<Duration> = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed());
    }
    t.sort();
    let mid = t.len() / 2;
    let median = if t.len() % 2 == 1 { t[mid] } else { (t[mid - 1] + t[mid]) / 2 };
    // a zero reading only means the clock was too coarse; floor at 1 ns
    let floor = |d: Duration| d.as_secs_f64().max(1e-9);
    Ok(Timing { median: floor(median), min: floor(t[0]) })
}

fn bench_rows<T: Scalar>(m: &CooMatrix, a: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let built = build::<T>(m, &build_options(&a.build, m)?)?;
    let e = &built.matrix;
    let workers = worker_count(a.workers)?;
    let cfg = ExecutionConfig { record_stats: false, ..ExecutionConfig::new(workers, Scheduling::Stealing) };
    let x64 = lcg::vector(e.dimension(), a.build.seed);
    let x: Vec<T> = x64.iter().map(|&v| T::from_f64(v)).collect();
    let xp = e.plan.permute_vector(&x)?;
    let ehyb_t = time_reps(a.reps, a.warmup, || spmv_ehyb(e, &xp, &cfg).map(drop).map_err(CliError::from))?;
    let y_ehyb = spmv_ehyb_user(e, &x, &cfg)?;

    let csr = coo_to_csr(m);
    let csr_t = time_reps(a.reps, a.warmup, || spmv_csr(&csr, &x64).map(drop).map_err(CliError::from))?;
    let y_csr = spmv_csr(&csr, &x64)?;

    let fp = footprint_stats(e);
    let prep = built.timings.total().as_secs_f64();
    let flops = 2.0 * m.nnz() as f64;
    let row = |kernel: &str, precision: &str, t: &Timing, hash: String| BenchRow {
        schema_version: report::BENCH_SCHEMA_VERSION,
        matrix: a.input.display().to_string(),
        kernel: kernel.into(),
        precision: precision.into(),
        dimension: e.dimension(),
        nnz: m.nnz(),
        n_parts: e.n_parts(),
        vec_cache_size: e.params.vec_cache_size,
        inner_fraction: built.cut.inner_fraction,
        ell_nnz: e.nnz_ell(),
        er_nnz: e.nnz_er(),
        footprint_bytes: fp.total_bytes,
        per_slot_savings: fp.savings_vs_32bit_cols,
        workers,
        reps: a.reps,
        warmup: a.warmup,
        median_seconds: t.median,
        min_seconds: t.min,
        gflops: flops / t.median / 1e9,
        partition_seconds: built.timings.partition.as_secs_f64(),
        assemble_seconds: built.timings.assemble.as_secs_f64(),
        preprocessing_seconds: prep,
        preprocessing_ratio: prep / ehyb_t.median,
        output_hash: hash,
    };
    Ok(vec![
        row("ehyb", a.precision.name(), &ehyb_t, report::fnv1a(y_ehyb.iter().map(|v| v.to_f64()))),
        row("csr", "f64", &csr_t, report::fnv1a(y_csr.iter().copied())),
    ])
}

/// Build the benchmark rows for `a` (EHYB first, then CSR).
pub fn bench_report(a: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let m = load_matrix(&a.input)?;
    m.ensure_square()?;
    match a.precision {
        Precision::F32 => bench_rows::<f32>(&m, a),
        Precision::F64 => bench_rows::<f64>(&m, a),
    }
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let rows = bench_report(a)?;
    let mut sink: Box<dyn Write + '_> = match &a.report {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| CliError::File { path: p.clone(), source })?,
        )),
        None => Box::new(&mut *out),
    };
    match a.out {
        OutputFormat::Csv => report::write_csv(&rows, &mut sink)?,
        OutputFormat::Json => report::write_json(&rows, &mut sink)?,
    }
    sink.flush()?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub dimension: usize,
    pub padded_dimension: usize,
    pub nnz: usize,
    pub k: usize,
    pub n_parts: usize,
    pub vec_cache_size: usize,
    pub inner_fraction: f64,
    /// Mean inner fraction over seeded random balanced partitions.
    pub random_baseline_inner_fraction: f64,
    pub ell_nnz: usize,
    pub er_nnz: usize,
    pub er_rows: usize,
    /// Share of ELL slots holding padding rather than entries.
    pub ell_padding_overhead: f64,
    pub er_padding_overhead: f64,
    /// `(width, slices)` pairs per partition, widest first.
    pub width_histogram: Vec<Vec<(u32, usize)>>,
    pub footprint: Footprint,
    pub traffic: TrafficModel,
}

fn padding_share(slots: usize, entries: usize) -> f64 {
    if slots == 0 {
        0.0
    } else {
        (slots - entries) as f64 / slots as f64
    }
}

fn stats_for<T: Scalar>(m: &CooMatrix, a: &StatsArgs) -> Result<StatsReport, CliError> {
    let built = build::<T>(m, &build_options(&a.build, m)?)?;
    let e = &built.matrix;
    let mut baseline = 0.0;
    for i in 0..a.baseline_samples {
        let p = random_balanced_partition(
            e.dimension(),
            e.n_parts(),
            e.params.vec_cache_size,
            a.build.seed.wrapping_add(i),
        )?;
        baseline += cut_metrics(m, &p)?.inner_fraction;
    }
    Ok(StatsReport {
        dimension: e.dimension(),
        padded_dimension: e.padded_dimension(),
        nnz: e.nnz(),
        k: e.params.k,
        n_parts: e.n_parts(),
        vec_cache_size: e.params.vec_cache_size,
        inner_fraction: built.cut.inner_fraction,
        random_baseline_inner_fraction: baseline / a.baseline_samples.max(1) as f64,
        ell_nnz: e.nnz_ell(),
        er_nnz: e.nnz_er(),
        er_rows: e.plan.n_er_rows(),
        ell_padding_overhead: padding_share(e.val_ell.len(), e.nnz_ell()),
        er_padding_overhead: padding_share(e.val_er.len(), e.nnz_er()),
        width_histogram: (0..e.n_parts()).map(|q| e.width_histogram(q)).collect(),
        footprint: footprint_stats(e),
        traffic: traffic_model(e),
    })
}

/// Compute the statistics printed by `stats`.
pub fn stats_report(a: &StatsArgs) -> Result<StatsReport, CliError> {
    let m = load_matrix(&a.input)?;
    m.ensure_square()?;
    match Precision::from_tau(a.tau)? {
        Precision::F32 => stats_for::<f32>(&m, a),
        Precision::F64 => stats_for::<f64>(&m, a),
    }
}

fn stats(a: &StatsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = stats_report(a)?;
    serde_json::to_writer_pretty(&mut *out, &r)?;
    writeln!(out)?;
    Ok(EXIT_OK)
}
