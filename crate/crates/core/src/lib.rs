//! Explicitly-caching hybrid (EHYB) sparse matrix format.
//!
//! The pipeline turns a square sparse matrix into a layout where most
//! entries read the input vector from a small per-partition window:
//!
//! 1. [`partition`] builds the undirected graph of the matrix and splits
//!    its vertices into `K x P` balanced parts.
//! 2. [`format`] sizes the parts so each window fits the simulated shared
//!    memory, reorders rows by partition and row width, and assembles a
//!    sliced-ELL part with 16-bit partition-local column indices plus an
//!    "extra rows" part for the entries whose column leaves the partition.
//! 3. [`engine`] runs SpMV over the assembled structure on a simulated
//!    block/warp device, and provides the CSR reference kernel.
//!
//! [`matrix`] and [`container`] cover ingestion and persistence.

pub mod container;
pub mod engine;
pub mod error;
pub mod format;
pub mod matrix;
mod par;
pub mod partition;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use container::{read_ehyb_container, write_ehyb_container, AnyEhyb};
pub use engine::{
    spmv_csr, spmv_ehyb, spmv_ehyb_user, traffic_model, ExecStats, ExecutionConfig, Scheduling,
    TrafficModel,
};
pub use error::{Error, Result};
pub use format::{
    assemble_ehyb, assemble_ehyb_with, build_reorder_plan, classify_rows, compute_params, footprint_stats,
    DeviceProfile, EhybMatrix, EhybParams, Footprint, ReorderPlan, RowClassification,
};
pub use matrix::{coo_to_csr, csr_to_coo, parse_matrix_market, write_matrix_market, CooMatrix, CsrMatrix};
pub use par::Parallelism;
pub use partition::{
    build_graph, cut_metrics, load_partition_file, partition_graph, random_balanced_partition, rebalance,
    save_partition_file, AdjacencyGraph, CutMetrics, PartitionMap,
};
pub use scalar::Scalar;
