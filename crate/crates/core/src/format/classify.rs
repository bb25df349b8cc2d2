use std::cmp::Reverse;

use crate::error::{Error, Result};
use crate::matrix::CooMatrix;
use crate::partition::PartitionMap;

/// Per-row split into entries whose column shares the row's partition
/// (`inner`) and the rest (`outer`), plus the two row orders derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowClassification {
    pub inner_count: Vec<u32>,
    pub outer_count: Vec<u32>,
    /// All rows grouped by partition id, descending inner count inside each
    /// partition, ascending row index on ties.
    pub ell_order: Vec<usize>,
    /// `ell_order[part_starts[q]..part_starts[q + 1]]` are the rows of part `q`.
    pub part_starts: Vec<usize>,
    /// Rows with at least one outer entry, descending outer count, ascending
    /// row index on ties.
    pub er_order: Vec<usize>,
}

impl RowClassification {
    pub fn n_rows(&self) -> usize {
        self.inner_count.len()
    }

    pub fn n_parts(&self) -> usize {
        self.part_starts.len() - 1
    }

    pub fn rows_of_part(&self, q: usize) -> &[usize] {
        &self.ell_order[self.part_starts[q]..self.part_starts[q + 1]]
    }
}

pub fn classify_rows(m: &CooMatrix, p: &PartitionMap) -> Result<RowClassification> {
    let n = m.ensure_square()?;
    if p.n_vertices() != n {
        return Err(Error::DimensionMismatch { what: "partition", expected: n, actual: p.n_vertices() });
    }
    let mut inner_count = vec![0u32; n];
    let mut outer_count = vec![0u32; n];
    for &(r, c, _) in m.entries() {
        if p.part_of(r) == p.part_of(c) {
            inner_count[r] += 1;
        } else {
            outer_count[r] += 1;
        }
    }

    let mut ell_order: Vec<usize> = (0..n).collect();
    ell_order.sort_by_key(|&r| (p.part_of(r), Reverse(inner_count[r]), r));
    let mut part_starts = vec![0usize; p.n_parts() + 1];
    for q in 0..p.n_parts() {
        part_starts[q + 1] = part_starts[q] + p.part_sizes()[q];
    }

    let mut er_order: Vec<usize> = (0..n).filter(|&r| outer_count[r] > 0).collect();
    er_order.sort_by_key(|&r| (Reverse(outer_count[r]), r));

    Ok(RowClassification { inner_count, outer_count, ell_order, part_starts, er_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn block_diagonal_has_no_outer() {
        let m = synth::block_diagonal(&[4, 4], 3);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let c = classify_rows(&m, &p).unwrap();
        assert!(c.outer_count.iter().all(|&o| o == 0));
        assert!(c.er_order.is_empty());
    }

    #[test]
    fn tridiagonal_cut_rows() {
        let m = synth::tridiagonal(8);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let c = classify_rows(&m, &p).unwrap();
        assert_eq!(c.outer_count, vec![0, 0, 0, 1, 1, 0, 0, 0]);
        assert_eq!(c.inner_count, vec![2, 3, 3, 2, 2, 3, 3, 2]);
        assert_eq!(c.er_order, vec![3, 4]);
        assert_eq!(c.rows_of_part(0), &[1, 2, 0, 3]);
        assert_eq!(c.rows_of_part(1), &[5, 6, 4, 7]);
    }

    #[test]
    fn single_far_entry() {
        let m = CooMatrix::new(6, 6, vec![(0, 5, 1.0)]).unwrap();
        let p = PartitionMap::new(2, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let c = classify_rows(&m, &p).unwrap();
        assert_eq!((c.inner_count[0], c.outer_count[0]), (0, 1));
        assert_eq!(c.er_order, vec![0]);
    }

    #[test]
    fn counts_add_up() {
        let m = synth::random_sparse(60, 0.08, 5);
        let p = crate::partition::random_balanced_partition(60, 3, 20, 1).unwrap();
        let c = classify_rows(&m, &p).unwrap();
        let csr = crate::matrix::coo_to_csr(&m);
        for r in 0..60 {
            assert_eq!((c.inner_count[r] + c.outer_count[r]) as usize, csr.row_len(r));
        }
        let mut sorted = c.ell_order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn mismatched_partition() {
        let m = synth::tridiagonal(4);
        assert!(classify_rows(&m, &PartitionMap::single(5)).is_err());
    }
}
