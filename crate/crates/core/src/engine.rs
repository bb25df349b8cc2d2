//! SpMV kernels: the CSR reference and the EHYB kernel on a simulated
//! block/warp device.
//!
//! The EHYB kernel runs in two phases separated by a barrier. In the ELL
//! phase each block (one per partition) copies its window of the reordered
//! input vector into a private cache and computes every row of its slices
//! from that cache. In the ER phase the extra-row slices are claimed from a
//! single global counter, their row sums are computed from the full input
//! vector, and after all of them finish each sum is added to its output row
//! through the `y_idx_er` scatter table. Every output row gets exactly one
//! ELL write and at most one ER add, in storage order, so the result does
//! not depend on worker count or scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{EhybMatrix, INDEX_BYTES};
use crate::matrix::CsrMatrix;
use crate::par::{self, Parallelism};
use crate::scalar::Scalar;

/// Reference kernel; each row accumulates in ascending column order.
pub fn spmv_csr(m: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.n_cols {
        return Err(Error::DimensionMismatch { what: "input vector", expected: m.n_cols, actual: x.len() });
    }
    Ok((0..m.n_rows).map(|r| m.row(r).fold(0.0, |acc, (c, v)| acc + v * x[c])).collect())
}

/// How simulated workers pick up blocks and ER slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheduling {
    /// Round-robin: worker `w` takes items `w, w + W, w + 2W, ...`.
    Static,
    /// Workers claim the next item from a shared atomic counter.
    Stealing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionConfig {
    /// Simulated concurrently running blocks.
    pub worker_count: usize,
    pub scheduling: Scheduling,
    pub record_stats: bool,
    /// Whether workers run on the rayon pool or one after another.
    pub parallelism: Parallelism,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            worker_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            scheduling: Scheduling::Stealing,
            record_stats: true,
            parallelism: Parallelism::default(),
        }
    }
}

impl ExecutionConfig {
    pub fn new(worker_count: usize, scheduling: Scheduling) -> Self {
        ExecutionConfig { worker_count, scheduling, ..Default::default() }
    }
}

/// Counters gathered by [`spmv_ehyb`] when `record_stats` is set; all zero
/// otherwise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStats {
    /// Input reads served from a partition cache (ELL entries).
    pub cached_loads: usize,
    /// Input reads from the full vector (ER entries).
    pub uncached_loads: usize,
    pub flops: usize,
    pub bytes_touched_model: usize,
    pub slices_per_block: Vec<usize>,
    pub blocks_per_worker: Vec<usize>,
    pub er_slices_per_worker: Vec<usize>,
    /// ELL rows already written when the first ER sum was added to the
    /// output; equals the padded dimension when the phase barrier holds.
    pub ell_rows_written_before_er: usize,
}

struct WorkQueue {
    scheduling: Scheduling,
    workers: usize,
    total: usize,
    next: AtomicUsize,
}

impl WorkQueue {
    fn new(scheduling: Scheduling, workers: usize, total: usize) -> Self {
        WorkQueue { scheduling, workers, total, next: AtomicUsize::new(0) }
    }

    /// `round` counts the items this worker has taken so far.
    fn claim(&self, worker: usize, round: usize) -> Option<usize> {
        let item = match self.scheduling {
            Scheduling::Static => worker + round * self.workers,
            Scheduling::Stealing => self.next.fetch_add(1, Ordering::Relaxed),
        };
        (item < self.total).then_some(item)
    }
}

#[derive(Default)]
struct WorkerTally {
    cached: usize,
    uncached: usize,
    blocks: Vec<(usize, usize)>,
    items: usize,
}

/// Run the EHYB kernel on a vector already in reordered space
/// (see [`ReorderPlan::permute_vector`](crate::ReorderPlan::permute_vector)).
pub fn spmv_ehyb<T: Scalar>(e: &EhybMatrix<T>, x: &[T], cfg: &ExecutionConfig) -> Result<(Vec<T>, ExecStats)> {
    let padded = e.padded_dimension();
    if x.len() != padded {
        return Err(Error::DimensionMismatch { what: "reordered input vector", expected: padded, actual: x.len() });
    }
    if cfg.worker_count == 0 {
        return Err(Error::InvalidArgument("worker_count must be at least 1".into()));
    }
    if e.part_boundary.len() != e.n_parts() + 1 || e.position_ell.len() != e.n_slices_ell() + 1 {
        return Err(Error::Corrupt("matrix is not assembled".into()));
    }
    let warp = e.warp_size();
    let workers = cfg.worker_count;
    let record = cfg.record_stats;
    let mut y = vec![T::ZERO; padded];

    // ELL phase: one block per partition, each owning a disjoint output window.
    let ell_rows_written = AtomicUsize::new(0);
    let windows: Vec<Mutex<&mut [T]>> = {
        let bounds = &e.part_boundary;
        par::split_at_offsets(&mut y, bounds).into_iter().map(Mutex::new).collect()
    };
    let blocks = WorkQueue::new(cfg.scheduling, workers, e.n_parts());
    let ell_tallies = par::map_collect((0..workers).collect(), cfg.parallelism, |w| {
        let mut tally = WorkerTally::default();
        let mut round = 0;
        while let Some(b) = blocks.claim(w, round) {
            round += 1;
            let mut out = windows[b].lock().expect("block window");
            let (slices, cached) = run_block(e, x, b, &mut out, cfg.scheduling);
            ell_rows_written.fetch_add(out.len(), Ordering::Release);
            if record {
                tally.cached += cached;
                tally.blocks.push((b, slices));
            }
        }
        tally.items = round;
        tally
    });
    drop(windows);
    // barrier: every block has returned
    let rows_before_er = ell_rows_written.load(Ordering::Acquire);

    // ER phase: slices from one global queue, sums scattered after the phase.
    let n_er_slices = e.n_slices_er();
    let mut er_sums = vec![T::ZERO; n_er_slices * warp];
    let er_tallies = {
        let sums: Vec<Mutex<&mut [T]>> = er_sums.chunks_mut(warp).map(Mutex::new).collect();
        let slices = WorkQueue::new(cfg.scheduling, workers, n_er_slices);
        par::map_collect((0..workers).collect(), cfg.parallelism, |w| {
            let mut tally = WorkerTally::default();
            let mut round = 0;
            while let Some(s) = slices.claim(w, round) {
                round += 1;
                let mut out = sums[s].lock().expect("ER slice");
                let loads = run_er_slice(e, x, s, &mut out);
                if record {
                    tally.uncached += loads;
                }
            }
            tally.items = round;
            tally
        })
    };
    for (slot, &row) in e.y_idx_er().iter().enumerate() {
        y[row as usize] += er_sums[slot];
    }

    let mut stats = ExecStats::default();
    if record {
        let mut slices_per_block = vec![0; e.n_parts()];
        for t in &ell_tallies {
            for &(b, s) in &t.blocks {
                slices_per_block[b] = s;
            }
        }
        stats = ExecStats {
            cached_loads: ell_tallies.iter().map(|t| t.cached).sum(),
            uncached_loads: er_tallies.iter().map(|t| t.uncached).sum(),
            flops: 2 * e.nnz(),
            bytes_touched_model: traffic_model(e).total,
            slices_per_block,
            blocks_per_worker: ell_tallies.iter().map(|t| t.items).collect(),
            er_slices_per_worker: er_tallies.iter().map(|t| t.items).collect(),
            ell_rows_written_before_er: rows_before_er,
        };
    }
    Ok((y, stats))
}

/// One block: cache the partition's input window, then run its slices.
/// Returns (slices processed, cached loads).
fn run_block<T: Scalar>(e: &EhybMatrix<T>, x: &[T], block: usize, out: &mut [T], scheduling: Scheduling) -> (usize, usize) {
    let warp = e.warp_size();
    let window_start = e.part_boundary[block];
    let cache: Vec<T> = x[window_start..e.part_boundary[block + 1]].to_vec();
    let spp = e.params.slices_per_partition();
    let first_slice = block * spp;

    // within a block, slices are taken from the block's own counter
    let counter = AtomicUsize::new(0);
    let next = |i: usize| match scheduling {
        Scheduling::Static => (i < spp).then_some(i),
        Scheduling::Stealing => Some(counter.fetch_add(1, Ordering::Relaxed)).filter(|&s| s < spp),
    };

    let mut processed = 0;
    let mut cached = 0;
    while let Some(local) = next(processed) {
        processed += 1;
        let slice = first_slice + local;
        let position = e.position_ell[slice];
        let width = e.width_ell[slice] as usize;
        for lane in 0..warp {
            let mut acc = T::ZERO;
            for k in 0..width {
                let idx = position + k * warp + lane;
                acc += e.val_ell[idx] * cache[e.col_ell[idx] as usize];
            }
            let row = slice * warp + lane;
            out[row - window_start] = acc;
            cached += e.row_len_ell[row] as usize;
        }
    }
    (processed, cached)
}

/// One ER slice against the uncached input. Returns the uncached loads.
fn run_er_slice<T: Scalar>(e: &EhybMatrix<T>, x: &[T], slice: usize, out: &mut [T]) -> usize {
    let warp = e.warp_size();
    let position = e.position_er[slice];
    let width = e.width_er[slice] as usize;
    let mut loads = 0;
    for (lane, sum) in out.iter_mut().enumerate() {
        let mut acc = T::ZERO;
        for k in 0..width {
            let idx = position + k * warp + lane;
            acc += e.val_er[idx] * x[e.col_er[idx] as usize];
        }
        *sum = acc;
        loads += e.row_len_er[slice * warp + lane] as usize;
    }
    loads
}

/// Original-order wrapper: permute `x`, run the kernel, unpermute.
pub fn spmv_ehyb_user<T: Scalar>(e: &EhybMatrix<T>, x: &[T], cfg: &ExecutionConfig) -> Result<Vec<T>> {
    let xr = e.plan.permute_vector(x)?;
    let (yr, _) = spmv_ehyb(e, &xr, &ExecutionConfig { record_stats: false, ..*cfg })?;
    e.plan.unpermute_vector(&yr)
}

/// Modelled device memory traffic of one SpMV, in bytes:
///
/// ```text
/// ell_slots * (tau + 2) + er_slots * (tau + 4) + metadata
///   + dimension * tau      (each partition window read once into cache)
///   + er_nnz * tau         (uncached input reads)
///   + dimension * tau      (output writes)
/// ```
///
/// Metadata counts slice offsets and widths of both parts, the partition
/// boundaries and the ER scatter table at 4 bytes per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub ell_slot_bytes: usize,
    pub er_slot_bytes: usize,
    pub metadata_bytes: usize,
    pub cached_input_bytes: usize,
    pub uncached_input_bytes: usize,
    pub output_bytes: usize,
    pub total: usize,
}

pub fn traffic_model<T: Scalar>(e: &EhybMatrix<T>) -> TrafficModel {
    let tau = T::TAU;
    let ell_slot_bytes = e.val_ell.len() * (tau + 2);
    let er_slot_bytes = e.val_er.len() * (tau + 4);
    let metadata_bytes = (e.position_ell.len()
        + e.width_ell.len()
        + e.part_boundary.len()
        + e.position_er.len()
        + e.width_er.len()
        + e.y_idx_er().len())
        * INDEX_BYTES;
    let cached_input_bytes = e.dimension() * tau;
    let uncached_input_bytes = e.nnz_er() * tau;
    let output_bytes = e.dimension() * tau;
    TrafficModel {
        ell_slot_bytes,
        er_slot_bytes,
        metadata_bytes,
        cached_input_bytes,
        uncached_input_bytes,
        output_bytes,
        total: ell_slot_bytes + er_slot_bytes + metadata_bytes + cached_input_bytes + uncached_input_bytes + output_bytes,
    }
}
