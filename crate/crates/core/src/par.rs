//! Data-parallel helpers. With the `parallel` feature the work items are
//! handed to rayon; without it (or with [`Parallelism::Sequential`]) they run
//! in order on the calling thread. Callers only pass items with disjoint
//! outputs, so both paths produce identical results.

/// Execution strategy for the data-parallel loops in assembly and SpMV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

pub(crate) fn for_each<I, F>(items: Vec<I>, par: Parallelism, f: F)
where
    I: Send,
    F: Fn(I) + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel if items.len() > 1 => {
            use rayon::prelude::*;
            items.into_par_iter().for_each(f);
        }
        _ => items.into_iter().for_each(f),
    }
}

pub(crate) fn map_collect<I, R, F>(items: Vec<I>, par: Parallelism, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel if items.len() > 1 => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Split `data` into consecutive mutable chunks delimited by `offsets`
/// (`offsets[0] == 0`, non-decreasing, last element `== data.len()`).
pub(crate) fn split_at_offsets<'a, T>(mut data: &'a mut [T], offsets: &[usize]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = data.split_at_mut(w[1] - w[0]);
        out.push(head);
        data = tail;
    }
    debug_assert!(data.is_empty());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_follows_offsets() {
        let mut v = [1, 2, 3, 4, 5];
        let parts = split_at_offsets(&mut v, &[0, 2, 2, 5]);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0], &[1, 2]);
        assert!(parts[1].is_empty());
        assert_eq!(parts[2], &[3, 4, 5]);
    }

    #[test]
    fn both_strategies_agree() {
        let seq = map_collect((0..100).collect(), Parallelism::Sequential, |i: u64| i * i);
        let par = map_collect((0..100).collect(), Parallelism::Parallel, |i: u64| i * i);
        assert_eq!(seq, par);
    }
}
