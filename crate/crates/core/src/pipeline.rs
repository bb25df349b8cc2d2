//! End-to-end preprocessing: parameters, partition, reorder plan, assembly.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::format::{assemble_ehyb_with, build_reorder_plan, classify_rows, compute_params, DeviceProfile, EhybMatrix, EhybParams};
use crate::matrix::CooMatrix;
use crate::par::Parallelism;
use crate::partition::{build_graph, cut_metrics, partition_graph, rebalance, CutMetrics, PartitionMap};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub profile: DeviceProfile,
    /// Tie-breaking seed for the built-in partitioner.
    pub seed: u64,
    /// Use this partition (e.g. from an external partitioner) instead of
    /// the built-in one. Overfull parts are rebalanced to the cache size.
    pub partition: Option<PartitionMap>,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    /// Graph construction and partitioning (or rebalancing a supplied map).
    pub partition: Duration,
    /// Row classification, reorder plan and assembly.
    pub assemble: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.partition + self.assemble
    }
}

#[derive(Debug, Clone)]
pub struct Built<T> {
    pub matrix: EhybMatrix<T>,
    pub partition: PartitionMap,
    pub cut: CutMetrics,
    pub timings: StageTimings,
}

impl<T> Built<T> {
    pub fn params(&self) -> &EhybParams {
        &self.matrix.params
    }
}

/// Convert a square matrix to EHYB with value type `T`.
pub fn build<T: Scalar>(m: &CooMatrix, opts: &BuildOptions) -> Result<Built<T>> {
    let n = m.ensure_square()?;
    let params = compute_params(n, T::TAU, &opts.profile)?;

    let start = Instant::now();
    let graph = build_graph(m)?;
    let partition = match &opts.partition {
        Some(p) => {
            let mut p = p.clone().with_n_parts(params.n_parts)?;
            rebalance(&graph, &mut p, params.vec_cache_size)?;
            p
        }
        None => partition_graph(&graph, params.n_parts, params.vec_cache_size, opts.seed)?,
    };
    let partition_time = start.elapsed();

    let start = Instant::now();
    let cls = classify_rows(m, &partition)?;
    let plan = build_reorder_plan(&cls, &params)?;
    let matrix = assemble_ehyb_with(m, &plan, &params, &partition, opts.parallelism)?;
    let assemble_time = start.elapsed();

    Ok(Built {
        cut: cut_metrics(m, &partition)?,
        matrix,
        partition,
        timings: StageTimings { partition: partition_time, assemble: assemble_time },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::synth;

    #[test]
    fn rejects_rectangular() {
        let err = build::<f64>(&CooMatrix::zeros(3, 4), &BuildOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotSquare { .. }));
        assert!(err.to_string().contains("matrix must be square"));
    }

    #[test]
    fn supplied_partition_is_rebalanced() {
        let m = synth::tridiagonal(16);
        let opts = BuildOptions {
            profile: DeviceProfile::new(2, 4, 64).unwrap(),
            partition: Some(PartitionMap::single(16)),
            ..Default::default()
        };
        let b = build::<f64>(&m, &opts).unwrap();
        assert_eq!(b.params().n_parts, 2);
        assert!(b.partition.max_part_size() <= b.params().vec_cache_size);
        assert_eq!(b.matrix.to_coo(), m);
    }

    #[test]
    fn supplied_partition_with_too_many_parts() {
        let opts = BuildOptions {
            profile: DeviceProfile::new(1, 4, 64).unwrap(),
            partition: Some(PartitionMap::new(3, vec![0, 1, 2, 0]).unwrap()),
            ..Default::default()
        };
        assert!(build::<f64>(&CooMatrix::identity(4), &opts).is_err());
    }
}
