//! Versioned benchmark report, written as CSV (one row per kernel) or JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Bumped whenever a column is added, removed or changes meaning.
pub const BENCH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub schema_version: u32,
    pub matrix: String,
    /// `ehyb` or `csr`.
    pub kernel: String,
    pub precision: String,
    pub dimension: usize,
    pub nnz: usize,
    pub n_parts: usize,
    pub vec_cache_size: usize,
    pub inner_fraction: f64,
    pub ell_nnz: usize,
    pub er_nnz: usize,
    pub footprint_bytes: usize,
    pub per_slot_savings: f64,
    pub workers: usize,
    pub reps: usize,
    pub warmup: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub gflops: f64,
    pub partition_seconds: f64,
    pub assemble_seconds: f64,
    pub preprocessing_seconds: f64,
    /// Preprocessing time over the median EHYB SpMV time.
    pub preprocessing_ratio: f64,
    /// FNV-1a over the bit patterns of the output vector.
    pub output_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
}

pub fn write_csv<W: Write>(rows: &[BenchRow], sink: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<BenchRow>, CliError> {
    let mut r = csv::Reader::from_reader(source);
    let rows = r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?;
    if let Some(bad) = rows.iter().find(|r| r.schema_version != BENCH_SCHEMA_VERSION) {
        return Err(CliError::Usage(format!("unsupported report schema version {}", bad.schema_version)));
    }
    Ok(rows)
}

pub fn write_json<W: Write>(rows: &[BenchRow], mut sink: W) -> Result<(), CliError> {
    let report = BenchReport { schema_version: BENCH_SCHEMA_VERSION, rows: rows.to_vec() };
    serde_json::to_writer_pretty(&mut sink, &report)?;
    writeln!(sink)?;
    Ok(())
}

pub fn fnv1a(values: impl IntoIterator<Item = f64>) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}
