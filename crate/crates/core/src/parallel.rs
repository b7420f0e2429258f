//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) the `map_*` functions fan out over
//! rayon; without it they fall back to plain iterators. The `*_seq` variants
//! are always sequential and exist so benchmarks can compare both paths in a
//! single build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub(crate) fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let square = |i: usize| (i * i) as u64;
        assert_eq!(map_range(100, square), map_range_seq(100, square));
    }
}
