use crate::error::{Error, Result};
use crate::format::params::{EhybParams, MAX_CACHE_ENTRIES};
use crate::format::plan::ReorderPlan;
use crate::matrix::{coo_to_csr, CooMatrix};
use crate::par::{self, split_at_offsets, Parallelism};
use crate::partition::PartitionMap;
use crate::scalar::Scalar;

/// Assembled EHYB matrix.
///
/// ELL slice `s` covers new rows `s*warp .. (s+1)*warp` and stores entry `k`
/// of lane `l` at `position_ell[s] + k*warp + l`. ER slices use the same
/// layout over ER slots. `row_len_*` record how many leading entries of each
/// row are real; the rest of a row is padding (value 0, column 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EhybMatrix<T> {
    pub params: EhybParams,
    pub plan: ReorderPlan,

    pub val_ell: Vec<T>,
    /// Offset into the owning partition's cached window.
    pub col_ell: Vec<u16>,
    /// Slice start offsets, one extra trailing element holding the total.
    pub position_ell: Vec<usize>,
    pub width_ell: Vec<u32>,
    /// Per new row.
    pub row_len_ell: Vec<u32>,
    /// First new row of each partition, plus the padded dimension.
    pub part_boundary: Vec<usize>,

    pub val_er: Vec<T>,
    /// Global new-order column.
    pub col_er: Vec<u32>,
    pub position_er: Vec<usize>,
    pub width_er: Vec<u32>,
    /// Per ER slot, padded to whole slices.
    pub row_len_er: Vec<u32>,
}

impl<T: Scalar> EhybMatrix<T> {
    pub fn dimension(&self) -> usize {
        self.plan.dimension
    }

    pub fn padded_dimension(&self) -> usize {
        self.plan.padded_dimension
    }

    pub fn warp_size(&self) -> usize {
        self.params.profile.warp_size
    }

    pub fn n_parts(&self) -> usize {
        self.params.n_parts
    }

    pub fn n_slices_ell(&self) -> usize {
        self.width_ell.len()
    }

    pub fn n_slices_er(&self) -> usize {
        self.width_er.len()
    }

    pub fn y_idx_er(&self) -> &[u32] {
        &self.plan.y_idx_er
    }

    pub fn nnz_ell(&self) -> usize {
        self.row_len_ell.iter().map(|&l| l as usize).sum()
    }

    pub fn nnz_er(&self) -> usize {
        self.row_len_er.iter().map(|&l| l as usize).sum()
    }

    pub fn nnz(&self) -> usize {
        self.nnz_ell() + self.nnz_er()
    }

    /// Map every stored (non-padding) entry back to original coordinates.
    pub fn to_coo(&self) -> CooMatrix {
        let warp = self.warp_size();
        let vec = self.params.vec_cache_size;
        let inv = &self.plan.inverse_table;
        let mut entries = Vec::with_capacity(self.nnz());
        for new_row in 0..self.padded_dimension() {
            let old_row = inv[new_row] as usize;
            let base = self.position_ell[new_row / warp] + new_row % warp;
            let window = (new_row / vec) * vec;
            for k in 0..self.row_len_ell[new_row] as usize {
                let idx = base + k * warp;
                let col = inv[window + self.col_ell[idx] as usize] as usize;
                entries.push((old_row, col, self.val_ell[idx].to_f64()));
            }
        }
        for (slot, &old_row) in self.plan.er_rows.iter().enumerate() {
            let base = self.position_er[slot / warp] + slot % warp;
            for k in 0..self.row_len_er[slot] as usize {
                let idx = base + k * warp;
                let col = inv[self.col_er[idx] as usize] as usize;
                entries.push((old_row as usize, col, self.val_er[idx].to_f64()));
            }
        }
        CooMatrix::new(self.dimension(), self.dimension(), entries).expect("indices come from the plan")
    }

    /// Per-partition histogram of ELL slice widths as `(width, slices)`
    /// pairs, widest first.
    pub fn width_histogram(&self, part: usize) -> Vec<(u32, usize)> {
        let spp = self.params.slices_per_partition();
        let mut hist: Vec<(u32, usize)> = Vec::new();
        for &w in &self.width_ell[part * spp..(part + 1) * spp] {
            match hist.iter_mut().find(|h| h.0 == w) {
                Some(h) => h.1 += 1,
                None => hist.push((w, 1)),
            }
        }
        hist.sort_by_key(|h| std::cmp::Reverse(h.0));
        hist
    }

    /// Structural consistency of all arrays, checked before running a
    /// matrix that did not come straight from [`assemble_ehyb`].
    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: String| Err(Error::Corrupt(m));
        self.params.validate()?;
        self.plan.validate()?;
        let warp = self.warp_size();
        let vec = self.params.vec_cache_size;
        let padded = self.params.padded_dimension();
        if self.plan.dimension != self.params.dimension || self.plan.padded_dimension != padded {
            return corrupt("plan dimensions disagree with parameters".into());
        }
        if self.part_boundary.len() != self.n_parts() + 1
            || self.part_boundary.iter().enumerate().any(|(q, &b)| b != q * vec)
        {
            return corrupt("partition boundaries".into());
        }
        check_slices("ELL", warp, padded, &self.position_ell, &self.width_ell, &self.row_len_ell)?;
        let er_slots = self.plan.n_er_rows().next_multiple_of(warp);
        check_slices("ER", warp, er_slots, &self.position_er, &self.width_er, &self.row_len_er)?;
        if self.val_ell.len() != *self.position_ell.last().unwrap() || self.col_ell.len() != self.val_ell.len() {
            return corrupt("ELL value/column lengths".into());
        }
        if self.val_er.len() != *self.position_er.last().unwrap() || self.col_er.len() != self.val_er.len() {
            return corrupt("ER value/column lengths".into());
        }
        if self.row_len_er[self.plan.n_er_rows()..].iter().any(|&l| l != 0) {
            return corrupt("ER padding slot holds entries".into());
        }
        if let Some(c) = self.col_ell.iter().find(|&&c| c as usize >= vec) {
            return corrupt(format!("ELL column {c} outside cache window {vec}"));
        }
        if let Some(c) = self.col_er.iter().find(|&&c| c as usize >= padded) {
            return corrupt(format!("ER column {c} outside padded dimension {padded}"));
        }
        Ok(())
    }
}

fn check_slices(what: &str, warp: usize, rows: usize, position: &[usize], width: &[u32], row_len: &[u32]) -> Result<()> {
    let bad = |m: &str| Err(Error::Corrupt(format!("{what} slices: {m}")));
    if !rows.is_multiple_of(warp) || width.len() != rows / warp || position.len() != width.len() + 1 || row_len.len() != rows {
        return bad("array lengths");
    }
    if position[0] != 0 {
        return bad("first offset");
    }
    for (s, &w) in width.iter().enumerate() {
        if position[s + 1].checked_sub(position[s]) != Some(warp * w as usize) {
            return bad("offsets do not match widths");
        }
        if row_len[s * warp..(s + 1) * warp].iter().any(|&l| l > w) {
            return bad("row longer than its slice");
        }
    }
    Ok(())
}

fn slice_layout(row_len: &[u32], warp: usize) -> (Vec<u32>, Vec<usize>) {
    let width: Vec<u32> = row_len.chunks(warp).map(|c| c.iter().copied().max().unwrap_or(0)).collect();
    let mut position = Vec::with_capacity(width.len() + 1);
    position.push(0);
    for &w in &width {
        position.push(position.last().unwrap() + warp * w as usize);
    }
    (width, position)
}

/// Place values and column indices into the ELL and ER parts, in parallel
/// over partitions (ELL) and ER slices when the default strategy is
/// parallel.
pub fn assemble_ehyb<T: Scalar>(
    m: &CooMatrix,
    plan: &ReorderPlan,
    params: &EhybParams,
    p: &PartitionMap,
) -> Result<EhybMatrix<T>> {
    assemble_ehyb_with(m, plan, params, p, Parallelism::default())
}

pub fn assemble_ehyb_with<T: Scalar>(
    m: &CooMatrix,
    plan: &ReorderPlan,
    params: &EhybParams,
    p: &PartitionMap,
    par: Parallelism,
) -> Result<EhybMatrix<T>> {
    let n = m.ensure_square()?;
    if params.tau != T::TAU {
        return Err(Error::PrecisionMismatch { expected: T::TAU as u32, found: params.tau as u32 });
    }
    if plan.dimension != n || params.dimension != n || p.n_vertices() != n {
        return Err(Error::DimensionMismatch { what: "matrix", expected: plan.dimension, actual: n });
    }
    if params.vec_cache_size > MAX_CACHE_ENTRIES {
        return Err(Error::Infeasible(format!("cache window {} exceeds 16-bit indices", params.vec_cache_size)));
    }
    let warp = params.warp_size();
    let vec = params.vec_cache_size;
    let spp = params.slices_per_partition();
    let csr = coo_to_csr(m);
    let reorder = &plan.reorder_table;
    let inverse = &plan.inverse_table;

    let mut inner = vec![0u32; n];
    let mut outer = vec![0u32; n];
    for &(r, c, _) in m.entries() {
        if p.part_of(r) == p.part_of(c) {
            inner[r] += 1;
        } else {
            outer[r] += 1;
        }
    }

    // sliced ELL part
    let row_len_ell: Vec<u32> = inverse
        .iter()
        .map(|&old| if (old as usize) < n { inner[old as usize] } else { 0 })
        .collect();
    let (width_ell, position_ell) = slice_layout(&row_len_ell, warp);
    let total_ell = *position_ell.last().unwrap();
    let mut val_ell = vec![T::ZERO; total_ell];
    let mut col_ell = vec![0u16; total_ell];
    {
        let bounds: Vec<usize> = (0..=params.n_parts).map(|q| position_ell[q * spp]).collect();
        let items: Vec<_> = split_at_offsets(&mut val_ell, &bounds)
            .into_iter()
            .zip(split_at_offsets(&mut col_ell, &bounds))
            .enumerate()
            .collect();
        par::for_each(items, par, |(q, (vals, cols))| {
            let origin = bounds[q];
            let window = q * vec;
            for new_row in window..window + vec {
                let old = inverse[new_row] as usize;
                if old >= n {
                    continue;
                }
                let row_part = p.part_of(old);
                let base = position_ell[new_row / warp] - origin + new_row % warp;
                let mut k = 0;
                for (c, v) in csr.row(old) {
                    if p.part_of(c) != row_part {
                        continue;
                    }
                    let local = reorder[c] as usize - window;
                    assert!(local < vec, "column {c} outside window of part {q}");
                    let idx = base + k * warp;
                    vals[idx] = T::from_f64(v);
                    cols[idx] = local as u16;
                    k += 1;
                }
            }
        });
    }

    // extra rows part
    let er_rows = &plan.er_rows;
    let mut row_len_er: Vec<u32> = er_rows.iter().map(|&r| outer[r as usize]).collect();
    row_len_er.resize(er_rows.len().next_multiple_of(warp), 0);
    let (width_er, position_er) = slice_layout(&row_len_er, warp);
    let total_er = *position_er.last().unwrap();
    let mut val_er = vec![T::ZERO; total_er];
    let mut col_er = vec![0u32; total_er];
    {
        let items: Vec<_> = split_at_offsets(&mut val_er, &position_er)
            .into_iter()
            .zip(split_at_offsets(&mut col_er, &position_er))
            .enumerate()
            .collect();
        par::for_each(items, par, |(s, (vals, cols))| {
            for lane in 0..warp {
                let Some(&old) = er_rows.get(s * warp + lane) else { break };
                let old = old as usize;
                let row_part = p.part_of(old);
                let mut k = 0;
                for (c, v) in csr.row(old) {
                    if p.part_of(c) == row_part {
                        continue;
                    }
                    let idx = lane + k * warp;
                    vals[idx] = T::from_f64(v);
                    cols[idx] = reorder[c];
                    k += 1;
                }
            }
        });
    }

    Ok(EhybMatrix {
        params: *params,
        plan: plan.clone(),
        val_ell,
        col_ell,
        position_ell,
        width_ell,
        row_len_ell,
        part_boundary: (0..=params.n_parts).map(|q| q * vec).collect(),
        val_er,
        col_er,
        position_er,
        width_er,
        row_len_er,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{build_reorder_plan, classify_rows, compute_params, DeviceProfile};
    use crate::synth;

    fn build<T: Scalar>(m: &CooMatrix, p: &PartitionMap, prof: DeviceProfile) -> EhybMatrix<T> {
        let params = compute_params(m.n_rows(), T::TAU, &prof).unwrap();
        let p = p.clone().with_n_parts(params.n_parts).unwrap();
        let plan = build_reorder_plan(&classify_rows(m, &p).unwrap(), &params).unwrap();
        assemble_ehyb(m, &plan, &params, &p).unwrap()
    }

    #[test]
    fn identity_single_slice() {
        let e: EhybMatrix<f64> = build(&CooMatrix::identity(4), &PartitionMap::single(4), DeviceProfile::new(1, 4, 64).unwrap());
        assert_eq!(e.n_slices_ell(), 1);
        assert_eq!(e.width_ell, vec![1]);
        assert_eq!(e.col_ell, vec![0, 1, 2, 3]);
        assert_eq!(e.val_ell, vec![1.0; 4]);
        assert!(e.val_er.is_empty() && e.width_er.is_empty());
        e.validate().unwrap();
    }

    #[test]
    fn tridiagonal_two_parts() {
        let m = synth::tridiagonal(8);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let e: EhybMatrix<f64> = build(&m, &p, DeviceProfile::new(2, 4, 64).unwrap());
        e.validate().unwrap();
        // new order [1,2,0,3 | 5,6,4,7]; ER rows 3 then 4
        assert_eq!(e.nnz_er(), 2);
        assert_eq!(e.width_er, vec![1]);
        // row 3 -> column 4 (new 6); row 4 -> column 3 (new 3)
        assert_eq!(&e.col_er[..2], &[6, 3]);
        assert_eq!(&e.val_er[..2], &[-1.0, -1.0]);
        assert_eq!(e.y_idx_er(), &[3, 6]);
        // slice 0 = new rows 0..4 = old rows 1,2,0,3 with widths 3,3,2,2
        assert_eq!(e.width_ell, vec![3, 3]);
        // old row 1: cols 0,1,2 -> locals 2,0,1
        assert_eq!([e.col_ell[0], e.col_ell[4], e.col_ell[8]], [2, 0, 1]);
        assert_eq!([e.val_ell[0], e.val_ell[4], e.val_ell[8]], [-1.0, 2.0, -1.0]);
        // old row 0 padding slot
        assert_eq!((e.col_ell[10], e.val_ell[10]), (0, 0.0));
        assert_eq!(e.to_coo(), m);
    }

    #[test]
    fn values_are_conserved() {
        let m = synth::random_sparse(150, 0.04, 21);
        let prof = DeviceProfile::new(4, 8, 256).unwrap();
        let params = compute_params(150, 8, &prof).unwrap();
        let p = crate::partition::random_balanced_partition(150, params.n_parts, params.vec_cache_size, 3).unwrap();
        let e: EhybMatrix<f64> = build(&m, &p, prof);
        let stored: f64 = e.val_ell.iter().chain(&e.val_er).sum();
        let input: f64 = m.entries().iter().map(|e| e.2).sum();
        assert!((stored - input).abs() < 1e-9);
        assert_eq!(e.nnz(), m.nnz());
        assert_eq!(e.to_coo(), m);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = synth::laplacian_2d(20, 20);
        let prof = DeviceProfile::new(4, 8, 512).unwrap();
        let params = compute_params(400, 8, &prof).unwrap();
        let p = crate::partition::random_balanced_partition(400, params.n_parts, params.vec_cache_size, 1).unwrap();
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params).unwrap();
        let a: EhybMatrix<f64> = assemble_ehyb_with(&m, &plan, &params, &p, Parallelism::Sequential).unwrap();
        let b: EhybMatrix<f64> = assemble_ehyb_with(&m, &plan, &params, &p, Parallelism::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision_narrows() {
        let m = CooMatrix::new(2, 2, vec![(0, 0, 0.1), (1, 1, 1.0 / 3.0)]).unwrap();
        let e: EhybMatrix<f32> = build(&m, &PartitionMap::single(2), DeviceProfile::new(1, 2, 64).unwrap());
        assert_eq!(e.val_ell, vec![0.1f32, 1.0 / 3.0]);
    }

    #[test]
    fn precision_mismatch() {
        let m = CooMatrix::identity(4);
        let params = compute_params(4, 8, &DeviceProfile::new(1, 4, 64).unwrap()).unwrap();
        let p = PartitionMap::single(4);
        let plan = build_reorder_plan(&classify_rows(&m, &p).unwrap(), &params).unwrap();
        assert!(matches!(assemble_ehyb::<f32>(&m, &plan, &params, &p), Err(Error::PrecisionMismatch { .. })));
    }
}
