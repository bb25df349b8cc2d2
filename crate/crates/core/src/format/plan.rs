use crate::error::{Error, Result};
use crate::format::classify::RowClassification;
use crate::format::params::EhybParams;
use crate::scalar::Scalar;

/// Row permutation and ER arrangement for one matrix.
///
/// Original rows `0..dimension` are mapped to new rows; the indices
/// `dimension..padded_dimension` stand for the padding rows that fill every
/// partition up to `vec_cache_size`, so both tables are bijections on
/// `0..padded_dimension`. The same permutation applies to columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderPlan {
    pub dimension: usize,
    pub padded_dimension: usize,
    /// old row -> new row
    pub reorder_table: Vec<u32>,
    /// new row -> old row
    pub inverse_table: Vec<u32>,
    /// ER slot -> old row
    pub er_rows: Vec<u32>,
    /// ER slot -> new row
    pub y_idx_er: Vec<u32>,
}

impl ReorderPlan {
    pub fn n_er_rows(&self) -> usize {
        self.er_rows.len()
    }

    /// old row -> ER slot, for rows that have one.
    pub fn arrange_table(&self) -> Vec<Option<usize>> {
        let mut t = vec![None; self.dimension];
        for (slot, &r) in self.er_rows.iter().enumerate() {
            t[r as usize] = Some(slot);
        }
        t
    }

    /// Move `x` into reordered space; padding positions are zero.
    pub fn permute_vector<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { what: "input vector", expected: self.dimension, actual: x.len() });
        }
        let mut out = vec![T::ZERO; self.padded_dimension];
        for (i, &v) in x.iter().enumerate() {
            out[self.reorder_table[i] as usize] = v;
        }
        Ok(out)
    }

    /// Inverse of [`permute_vector`](Self::permute_vector); padding is dropped.
    pub fn unpermute_vector<T: Scalar>(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.padded_dimension {
            return Err(Error::DimensionMismatch {
                what: "reordered vector",
                expected: self.padded_dimension,
                actual: y.len(),
            });
        }
        Ok(self.reorder_table[..self.dimension].iter().map(|&n| y[n as usize]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: &str| Err(Error::Corrupt(format!("reorder plan: {m}")));
        if self.reorder_table.len() != self.padded_dimension
            || self.inverse_table.len() != self.padded_dimension
            || self.dimension > self.padded_dimension
        {
            return corrupt("table lengths");
        }
        for (old, &new) in self.reorder_table.iter().enumerate() {
            if new as usize >= self.padded_dimension || self.inverse_table[new as usize] as usize != old {
                return corrupt("tables are not inverse permutations");
            }
        }
        if self.y_idx_er.len() != self.er_rows.len() {
            return corrupt("ER table lengths");
        }
        let mut seen = vec![false; self.dimension];
        for (&r, &y) in self.er_rows.iter().zip(&self.y_idx_er) {
            let r = r as usize;
            if r >= self.dimension || seen[r] || self.reorder_table[r] != y {
                return corrupt("ER scatter table");
            }
            seen[r] = true;
        }
        Ok(())
    }
}

/// Partitions are laid out in id order, each as its rows in classification
/// order followed by padding rows; ER slots follow the ER row order.
pub fn build_reorder_plan(
    cls: &RowClassification,
    params: &EhybParams,
) -> Result<ReorderPlan> {
    let dimension = cls.n_rows();
    if dimension != params.dimension {
        return Err(Error::DimensionMismatch { what: "classification", expected: params.dimension, actual: dimension });
    }
    if cls.n_parts() > params.n_parts {
        return Err(Error::Infeasible(format!(
            "partition has {} parts, parameters allow {}",
            cls.n_parts(),
            params.n_parts
        )));
    }
    let vec = params.vec_cache_size;
    let padded = params.padded_dimension();
    if padded > u32::MAX as usize {
        return Err(Error::Infeasible(format!("padded dimension {padded} exceeds 32-bit indices")));
    }

    let mut reorder_table = vec![u32::MAX; padded];
    let mut next_pad = dimension;
    for q in 0..params.n_parts {
        let rows: &[usize] = if q < cls.n_parts() { cls.rows_of_part(q) } else { &[] };
        if rows.len() > vec {
            return Err(Error::Infeasible(format!(
                "part {q} holds {} rows, cache window is {vec}",
                rows.len()
            )));
        }
        let base = q * vec;
        for (i, &r) in rows.iter().enumerate() {
            reorder_table[r] = (base + i) as u32;
        }
        for i in rows.len()..vec {
            reorder_table[next_pad] = (base + i) as u32;
            next_pad += 1;
        }
    }
    debug_assert_eq!(next_pad, padded);

    let mut inverse_table = vec![0u32; padded];
    for (old, &new) in reorder_table.iter().enumerate() {
        inverse_table[new as usize] = old as u32;
    }
    let er_rows: Vec<u32> = cls.er_order.iter().map(|&r| r as u32).collect();
    let y_idx_er = cls.er_order.iter().map(|&r| reorder_table[r]).collect();

    Ok(ReorderPlan { dimension, padded_dimension: padded, reorder_table, inverse_table, er_rows, y_idx_er })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{classify_rows, compute_params, DeviceProfile};
    use crate::matrix::CooMatrix;
    use crate::partition::{random_balanced_partition, PartitionMap};
    use crate::synth;

    fn params(dim: usize, p: usize, warp: usize, shm: usize) -> EhybParams {
        compute_params(dim, 8, &DeviceProfile::new(p, warp, shm).unwrap()).unwrap()
    }

    #[test]
    fn descending_within_single_partition() {
        // inner counts [1, 3, 2]
        let m = CooMatrix::new(3, 3, vec![(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0)]).unwrap();
        let prm = params(3, 1, 1, 1024);
        let cls = classify_rows(&m, &PartitionMap::single(3)).unwrap();
        let plan = build_reorder_plan(&cls, &prm).unwrap();
        assert_eq!(&plan.inverse_table[..3], &[1, 2, 0]);
        assert_eq!(&plan.reorder_table[..3], &[2, 0, 1]);
    }

    #[test]
    fn block_diagonal_has_empty_er() {
        let m = synth::block_diagonal(&[4, 4], 0);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params(8, 2, 4, 64)).unwrap();
        assert!(plan.arrange_table().iter().all(Option::is_none));
        assert!(plan.y_idx_er.is_empty());
        plan.validate().unwrap();
    }

    #[test]
    fn tridiagonal_hand_permutation() {
        let m = synth::tridiagonal(8);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params(8, 2, 4, 64)).unwrap();
        // part 0: rows 1,2 (3 inner) then 0,3 (2 inner); part 1: 5,6 then 4,7
        assert_eq!(plan.inverse_table, vec![1, 2, 0, 3, 5, 6, 4, 7]);
        assert_eq!(plan.er_rows, vec![3, 4]);
        assert_eq!(plan.y_idx_er, vec![3, 6]);
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(plan.permute_vector(&x).unwrap(), vec![1.0, 2.0, 0.0, 3.0, 5.0, 6.0, 4.0, 7.0]);
    }

    #[test]
    fn padding_rows_follow_real_rows() {
        let m = synth::tridiagonal(5);
        let prm = params(5, 2, 4, 64); // two windows of 4
        let p = PartitionMap::new(2, vec![0, 0, 0, 1, 1]).unwrap();
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &prm).unwrap();
        assert_eq!(plan.padded_dimension, 8);
        assert_eq!(&plan.reorder_table[5..], &[3, 6, 7]);
        let x = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let px = plan.permute_vector(&x).unwrap();
        assert_eq!(px[3], 0.0);
        assert_eq!(plan.unpermute_vector(&px).unwrap(), x);
        assert!(plan.permute_vector(&x[..4]).is_err());
    }

    #[test]
    fn identity_plan_pads_with_zero() {
        let prm = params(6, 1, 4, 1024);
        let plan = build_reorder_plan(&classify_rows(&CooMatrix::identity(6), &PartitionMap::single(6)).unwrap(), &prm).unwrap();
        let x = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(plan.permute_vector(&x).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn overfull_part_is_rejected() {
        let m = synth::tridiagonal(8);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 0, 1, 1, 1]).unwrap();
        assert!(build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params(8, 2, 4, 64)).is_err());
    }

    #[test]
    fn random_plan_is_bijective() {
        let m = synth::random_sparse(128, 0.05, 9);
        let prm = params(128, 4, 8, 512);
        let p = random_balanced_partition(128, 4, prm.vec_cache_size, 2).unwrap();
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &prm).unwrap();
        plan.validate().unwrap();
        for i in 0..plan.padded_dimension {
            assert_eq!(plan.reorder_table[plan.inverse_table[i] as usize] as usize, i);
        }
    }
}
