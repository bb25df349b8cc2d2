//! Graph partitioning of the matrix rows/columns.
//!
//! The matrix is viewed as an undirected graph (one vertex per row/column,
//! one edge per off-diagonal entry). Vertices are split into parts whose
//! size never exceeds the per-partition vector cache capacity. External
//! partitioners can be plugged in through the METIS-style text file.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::CooMatrix;

/// Symmetric adjacency structure in compressed form (`xadj`/`adjncy`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl AdjacencyGraph {
    /// Build from an undirected edge list. Self-loops and repeated edges are
    /// dropped.
    pub fn from_edges(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            assert!(u < n_vertices && v < n_vertices, "edge ({u}, {v}) out of range");
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; n_vertices + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..n_vertices {
            offsets[i + 1] += offsets[i];
        }
        AdjacencyGraph { offsets, targets: pairs.into_iter().map(|p| p.1).collect() }
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Sorted neighbour list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Number of edges whose endpoints lie in different parts.
    pub fn edge_cut(&self, p: &PartitionMap) -> usize {
        (0..self.n_vertices())
            .map(|u| self.neighbors(u).iter().filter(|&&v| v > u && p.part_of(v) != p.part_of(u)).count())
            .sum()
    }
}

/// Undirected graph of a square matrix; diagonal entries carry no edge.
pub fn build_graph(m: &CooMatrix) -> Result<AdjacencyGraph> {
    let n = m.ensure_square()?;
    Ok(AdjacencyGraph::from_edges(n, m.entries().iter().map(|&(r, c, _)| (r, c))))
}

/// Vertex to partition assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    n_parts: usize,
    assignment: Vec<u32>,
    part_sizes: Vec<usize>,
}

impl PartitionMap {
    pub fn new(n_parts: usize, assignment: Vec<u32>) -> Result<Self> {
        if n_parts == 0 {
            return Err(Error::InvalidArgument("partition count must be at least 1".into()));
        }
        let mut part_sizes = vec![0usize; n_parts];
        for (v, &a) in assignment.iter().enumerate() {
            let slot = part_sizes.get_mut(a as usize).ok_or_else(|| {
                Error::InvalidArgument(format!("vertex {v} assigned to part {a}, only {n_parts} parts"))
            })?;
            *slot += 1;
        }
        Ok(PartitionMap { n_parts, assignment, part_sizes })
    }

    /// Everything in part 0.
    pub fn single(n_vertices: usize) -> Self {
        PartitionMap { n_parts: 1, assignment: vec![0; n_vertices], part_sizes: vec![n_vertices] }
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn n_vertices(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn part_sizes(&self) -> &[usize] {
        &self.part_sizes
    }

    #[inline]
    pub fn part_of(&self, v: usize) -> usize {
        self.assignment[v] as usize
    }

    pub fn max_part_size(&self) -> usize {
        self.part_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Reinterpret with `n_parts` parts (adding empty ones). Fails when an
    /// existing id does not fit.
    pub fn with_n_parts(self, n_parts: usize) -> Result<Self> {
        if let Some(v) = self.assignment.iter().position(|&a| a as usize >= n_parts) {
            return Err(Error::PartitionFile(format!(
                "vertex {v} has part id {} but only {n_parts} parts are available",
                self.assignment[v]
            )));
        }
        PartitionMap::new(n_parts, self.assignment)
    }

    /// Merge part `from` into part `into`.
    pub fn merge(&self, from: usize, into: usize) -> Self {
        let assignment = self
            .assignment
            .iter()
            .map(|&a| if a as usize == from { into as u32 } else { a })
            .collect();
        PartitionMap::new(self.n_parts, assignment).expect("ids unchanged")
    }

    fn move_vertex(&mut self, v: usize, to: usize) {
        let from = self.part_of(v);
        self.part_sizes[from] -= 1;
        self.part_sizes[to] += 1;
        self.assignment[v] = to as u32;
    }
}

fn check_feasible(n_vertices: usize, n_parts: usize, capacity: usize) -> Result<()> {
    if n_parts == 0 {
        return Err(Error::InvalidArgument("partition count must be at least 1".into()));
    }
    if n_parts.saturating_mul(capacity) < n_vertices {
        return Err(Error::Infeasible(format!(
            "{n_parts} parts of capacity {capacity} cannot hold {n_vertices} vertices"
        )));
    }
    Ok(())
}

const UNASSIGNED: u32 = u32::MAX;

/// Greedy BFS region growing followed by capacity rebalancing and one
/// boundary refinement pass.
///
/// Regions are grown to `ceil(m / n_parts)` vertices, where `m` counts the
/// vertices with at least one edge. Each region starts from the unassigned
/// vertex of minimum degree (lowest index on ties, except that `seed` picks
/// among the tied candidates for the very first region) and restarts from
/// the next such vertex when its component is exhausted. Isolated vertices
/// are dealt round-robin to parts with room left.
pub fn partition_graph(g: &AdjacencyGraph, n_parts: usize, capacity: usize, seed: u64) -> Result<PartitionMap> {
    let n = g.n_vertices();
    check_feasible(n, n_parts, capacity)?;
    if n_parts == 1 {
        return Ok(PartitionMap::single(n));
    }

    let mut assignment = vec![UNASSIGNED; n];
    let mut sizes = vec![0usize; n_parts];

    let mut seeds: Vec<usize> = (0..n).filter(|&v| g.degree(v) > 0).collect();
    seeds.sort_by_key(|&v| (g.degree(v), v));
    let connected = seeds.len();
    if connected > 0 {
        let min_degree = g.degree(seeds[0]);
        let ties = seeds.iter().take_while(|&&v| g.degree(v) == min_degree).count();
        let pick = ChaCha8Rng::seed_from_u64(seed).gen_range(0..ties);
        seeds[..=pick].rotate_right(1);
    }
    let target = connected.div_ceil(n_parts);

    let mut cursor = 0usize;
    let mut queue = VecDeque::new();
    for part in 0..n_parts {
        queue.clear();
        while sizes[part] < target {
            let Some(v) = queue.pop_front() else {
                while cursor < seeds.len() && assignment[seeds[cursor]] != UNASSIGNED {
                    cursor += 1;
                }
                let Some(&s) = seeds.get(cursor) else { break };
                assignment[s] = part as u32;
                sizes[part] += 1;
                queue.push_back(s);
                continue;
            };
            for &u in g.neighbors(v) {
                if sizes[part] == target {
                    break;
                }
                if assignment[u] == UNASSIGNED {
                    assignment[u] = part as u32;
                    sizes[part] += 1;
                    queue.push_back(u);
                }
            }
        }
    }

    let mut next = 0usize;
    for v in (0..n).filter(|&v| g.degree(v) == 0) {
        while sizes[next] >= capacity {
            next = (next + 1) % n_parts;
        }
        assignment[v] = next as u32;
        sizes[next] += 1;
        next = (next + 1) % n_parts;
    }

    let mut map = PartitionMap { n_parts, assignment, part_sizes: sizes };
    rebalance(g, &mut map, capacity)?;
    refine_boundary(g, &mut map, capacity);
    Ok(map)
}

/// Enforce `part_size <= capacity` by evicting the boundary vertices with the
/// most external neighbours into the least-full adjacent part that still has
/// room (or the least-full part overall when no neighbour part has room).
pub fn rebalance(g: &AdjacencyGraph, map: &mut PartitionMap, capacity: usize) -> Result<()> {
    if g.n_vertices() != map.n_vertices() {
        return Err(Error::DimensionMismatch {
            what: "partition",
            expected: g.n_vertices(),
            actual: map.n_vertices(),
        });
    }
    check_feasible(map.n_vertices(), map.n_parts, capacity)?;

    for part in 0..map.n_parts {
        let excess = map.part_sizes[part].saturating_sub(capacity);
        if excess == 0 {
            continue;
        }
        let mut candidates: Vec<(usize, usize, usize)> = (0..map.n_vertices())
            .filter(|&v| map.part_of(v) == part)
            .map(|v| {
                let external = g.neighbors(v).iter().filter(|&&u| map.part_of(u) != part).count();
                (v, external, g.degree(v) - external)
            })
            .collect();
        // most external first, then fewest internal, then lowest index
        candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));

        for &(v, _, _) in candidates.iter().take(excess) {
            let adjacent = g
                .neighbors(v)
                .iter()
                .map(|&u| map.part_of(u))
                .filter(|&q| q != part && map.part_sizes[q] < capacity)
                .min_by_key(|&q| (map.part_sizes[q], q));
            let dest = match adjacent {
                Some(q) => q,
                None => (0..map.n_parts)
                    .filter(|&q| q != part && map.part_sizes[q] < capacity)
                    .min_by_key(|&q| (map.part_sizes[q], q))
                    .expect("feasible capacity leaves room somewhere"),
            };
            map.move_vertex(v, dest);
        }
    }
    Ok(())
}

/// One pass over the vertices in index order: move a vertex to the
/// neighbouring part holding most of its neighbours when that strictly
/// reduces the cut and the destination has room.
fn refine_boundary(g: &AdjacencyGraph, map: &mut PartitionMap, capacity: usize) {
    let mut counts = vec![0usize; map.n_parts];
    let mut touched = Vec::new();
    for v in 0..map.n_vertices() {
        let own = map.part_of(v);
        if g.neighbors(v).iter().all(|&u| map.part_of(u) == own) {
            continue;
        }
        for &u in g.neighbors(v) {
            let q = map.part_of(u);
            if counts[q] == 0 {
                touched.push(q);
            }
            counts[q] += 1;
        }
        let best = touched
            .iter()
            .copied()
            .filter(|&q| q != own && map.part_sizes[q] < capacity)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)));
        if let Some(q) = best {
            if counts[q] > counts[own] {
                map.move_vertex(v, q);
            }
        }
        for q in touched.drain(..) {
            counts[q] = 0;
        }
    }
}

/// Shuffle the vertices with a seeded generator and cut the permutation into
/// `n_parts` consecutive chunks of `ceil(n / n_parts)`. Used as the quality
/// baseline for [`partition_graph`].
pub fn random_balanced_partition(n_vertices: usize, n_parts: usize, capacity: usize, seed: u64) -> Result<PartitionMap> {
    check_feasible(n_vertices, n_parts, capacity)?;
    let mut order: Vec<usize> = (0..n_vertices).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let chunk = n_vertices.div_ceil(n_parts).max(1);
    let mut assignment = vec![0u32; n_vertices];
    for (i, &v) in order.iter().enumerate() {
        assignment[v] = (i / chunk) as u32;
    }
    PartitionMap::new(n_parts, assignment)
}

/// Split of the matrix entries into partition-local ("inner") entries and
/// entries whose column leaves the row's partition ("extra").
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CutMetrics {
    pub inner_entries: usize,
    pub extra_entries: usize,
    /// `inner_entries / nnz`; 1.0 for a matrix without entries.
    pub inner_fraction: f64,
}

pub fn cut_metrics(m: &CooMatrix, p: &PartitionMap) -> Result<CutMetrics> {
    let n = m.ensure_square()?;
    if p.n_vertices() != n {
        return Err(Error::DimensionMismatch { what: "partition", expected: n, actual: p.n_vertices() });
    }
    let inner_entries = m.entries().iter().filter(|&&(r, c, _)| p.part_of(r) == p.part_of(c)).count();
    let nnz = m.nnz();
    Ok(CutMetrics {
        inner_entries,
        extra_entries: nnz - inner_entries,
        inner_fraction: if nnz == 0 { 1.0 } else { inner_entries as f64 / nnz as f64 },
    })
}

/// Read a METIS-style partition file: one 0-based part id per line, one
/// line per vertex. The part count is `max id + 1`.
pub fn load_partition_file<R: BufRead>(source: R, n_vertices: usize) -> Result<PartitionMap> {
    let mut assignment = Vec::with_capacity(n_vertices);
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let id: u32 = t
            .parse()
            .map_err(|_| Error::PartitionFile(format!("line {}: invalid part id '{t}'", i + 1)))?;
        if id == UNASSIGNED {
            return Err(Error::PartitionFile(format!("line {}: part id too large", i + 1)));
        }
        assignment.push(id);
    }
    if assignment.len() != n_vertices {
        return Err(Error::PartitionFile(format!(
            "expected {n_vertices} lines, found {}",
            assignment.len()
        )));
    }
    let n_parts = assignment.iter().max().map_or(1, |&m| m as usize + 1);
    PartitionMap::new(n_parts, assignment)
}

pub fn save_partition_file<W: Write>(p: &PartitionMap, mut sink: W) -> Result<()> {
    for &a in &p.assignment {
        writeln!(sink, "{a}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn chain(n: usize) -> AdjacencyGraph {
        AdjacencyGraph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    fn assert_valid(p: &PartitionMap, capacity: usize) {
        assert_eq!(p.part_sizes().iter().sum::<usize>(), p.n_vertices());
        assert!(p.max_part_size() <= capacity);
        let mut sizes = vec![0; p.n_parts()];
        for &a in p.assignment() {
            sizes[a as usize] += 1;
        }
        assert_eq!(sizes, p.part_sizes());
    }

    #[test]
    fn graph_of_identity_has_no_edges() {
        let g = build_graph(&CooMatrix::identity(4)).unwrap();
        assert_eq!(g.n_vertices(), 4);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn graph_of_tridiagonal_is_chain() {
        let g = build_graph(&synth::tridiagonal(4)).unwrap();
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1, 3]);
        assert_eq!(g.neighbors(3), &[2]);
    }

    #[test]
    fn asymmetric_entry_symmetrised() {
        let m = CooMatrix::new(6, 6, vec![(2, 5, 1.0)]).unwrap();
        let g = build_graph(&m).unwrap();
        assert_eq!(g.neighbors(2), &[5]);
        assert_eq!(g.neighbors(5), &[2]);
    }

    #[test]
    fn graph_rejects_rectangular() {
        assert!(matches!(build_graph(&CooMatrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    /// Minimum cut over all balanced 2-partitions of a chain, by enumeration.
    fn brute_force_min_cut(g: &AdjacencyGraph, capacity: usize) -> usize {
        let n = g.n_vertices();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << n) {
            let ones = mask.count_ones() as usize;
            if ones > capacity || n - ones > capacity {
                continue;
            }
            let p = PartitionMap::new(2, (0..n).map(|v| (mask >> v) & 1).collect()).unwrap();
            best = best.min(g.edge_cut(&p));
        }
        best
    }

    #[test]
    fn chain_of_eight_in_two_parts() {
        let g = chain(8);
        assert_eq!(brute_force_min_cut(&g, 4), 1);
        let p = partition_graph(&g, 2, 4, 0).unwrap();
        assert_valid(&p, 4);
        assert_eq!(g.edge_cut(&p), 1);
        let first = p.part_of(0);
        assert!((0..4).all(|v| p.part_of(v) == first));
        assert!((4..8).all(|v| p.part_of(v) != first));
    }

    #[test]
    fn single_part() {
        let g = chain(10);
        let p = partition_graph(&g, 1, 10, 3).unwrap();
        assert!(p.assignment().iter().all(|&a| a == 0));
        assert_eq!(g.edge_cut(&p), 0);
    }

    #[test]
    fn infeasible_capacity() {
        assert!(matches!(partition_graph(&chain(10), 2, 4, 0), Err(Error::Infeasible(_))));
        assert!(matches!(partition_graph(&chain(10), 0, 40, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_beats_random() {
        let m = synth::laplacian_2d(16, 16);
        let g = build_graph(&m).unwrap();
        let p = partition_graph(&g, 4, 64, 0).unwrap();
        assert_valid(&p, 64);
        let r = random_balanced_partition(256, 4, 64, 0).unwrap();
        assert!(g.edge_cut(&p) < g.edge_cut(&r));
        assert!(cut_metrics(&m, &p).unwrap().inner_fraction > cut_metrics(&m, &r).unwrap().inner_fraction);
    }

    #[test]
    fn isolated_vertices_round_robin() {
        // vertices 0..4 form a chain, 4..10 are isolated
        let g = AdjacencyGraph::from_edges(10, [(0, 1), (1, 2), (2, 3)]);
        let p = partition_graph(&g, 3, 4, 0).unwrap();
        assert_valid(&p, 4);
        let g = AdjacencyGraph::from_edges(6, []);
        let p = partition_graph(&g, 3, 2, 0).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn rebalance_fixes_overfull_parts() {
        let g = chain(12);
        let mut p = PartitionMap::new(3, vec![0; 12]).unwrap();
        rebalance(&g, &mut p, 4).unwrap();
        assert_valid(&p, 4);
    }

    #[test]
    fn deterministic_for_seed() {
        let g = build_graph(&synth::random_sparse(200, 0.03, 7)).unwrap();
        let a = partition_graph(&g, 8, 32, 11).unwrap();
        let b = partition_graph(&g, 8, 32, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cut_metrics_examples() {
        let m = synth::tridiagonal(8);
        let p = PartitionMap::new(2, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let c = cut_metrics(&m, &p).unwrap();
        assert_eq!(c.extra_entries, 2);
        assert_eq!(c.inner_entries, 20);
        assert_eq!(c.inner_fraction, 20.0 / 22.0);

        let single = cut_metrics(&m, &PartitionMap::single(8)).unwrap();
        assert_eq!(single.inner_fraction, 1.0);

        let bd = synth::block_diagonal(&[3, 5], 1);
        let p = PartitionMap::new(2, vec![0, 0, 0, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(cut_metrics(&bd, &p).unwrap().extra_entries, 0);

        assert!(matches!(
            cut_metrics(&m, &PartitionMap::single(7)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partition_file_io() {
        let p = load_partition_file("0\n0\n1\n1\n".as_bytes(), 4).unwrap();
        assert_eq!(p.n_parts(), 2);
        assert_eq!(p.part_sizes(), &[2, 2]);

        let mut buf = Vec::new();
        save_partition_file(&p, &mut buf).unwrap();
        assert_eq!(load_partition_file(buf.as_slice(), 4).unwrap(), p);

        assert!(matches!(load_partition_file("0\n0\n1\n".as_bytes(), 4), Err(Error::PartitionFile(_))));
        assert!(matches!(load_partition_file("0\nx\n1\n1\n".as_bytes(), 4), Err(Error::PartitionFile(_))));
        assert!(matches!(p.with_n_parts(1), Err(Error::PartitionFile(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn capacity_always_respected(n in 1usize..120, density in 0.0f64..0.2, parts in 1usize..9, slack in 0usize..5, seed in any::<u64>()) {
                let m = synth::random_sparse(n, density, seed);
                let g = build_graph(&m).unwrap();
                let capacity = n.div_ceil(parts) + slack;
                let p = partition_graph(&g, parts, capacity, seed).unwrap();
                assert_valid(&p, capacity);
                prop_assert_eq!(&p, &partition_graph(&g, parts, capacity, seed).unwrap());
            }

            #[test]
            fn merging_parts_never_loses_inner(n in 2usize..80, seed in any::<u64>()) {
                let m = synth::random_sparse(n, 0.1, seed);
                let p = random_balanced_partition(n, 4, n, seed).unwrap();
                let before = cut_metrics(&m, &p).unwrap();
                let after = cut_metrics(&m, &p.merge(1, 0)).unwrap();
                prop_assert!(after.inner_entries >= before.inner_entries);
                let diag = m.entries().iter().filter(|e| e.0 == e.1).count();
                if m.nnz() > 0 {
                    prop_assert!(before.inner_fraction >= diag as f64 / m.nnz() as f64);
                    prop_assert!(before.inner_fraction <= 1.0);
                }
            }

            #[test]
            fn partition_file_round_trip(assign in proptest::collection::vec(0u32..6, 1..60)) {
                let n = assign.len();
                let p = PartitionMap::new(6, assign).unwrap();
                let mut buf = Vec::new();
                save_partition_file(&p, &mut buf).unwrap();
                let q = load_partition_file(buf.as_slice(), n).unwrap().with_n_parts(6).unwrap();
                prop_assert_eq!(p, q);
            }
        }
    }
}
