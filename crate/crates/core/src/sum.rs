//! Deterministic reductions.
//!
//! Work is split into fixed-size index chunks independent of the worker
//! count, each chunk is folded sequentially, and the chunk partials are
//! combined with a fixed pairwise tree. The result is therefore bitwise
//! identical whether the chunks run on one thread or many.

use alloc::vec::Vec;
use core::ops::{Add, Range};

pub(crate) const CHUNK: usize = 2048;

pub(crate) fn chunk_ranges(len: usize) -> impl Iterator<Item = Range<usize>> {
    (0..len.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(len))
}

/// Pairwise tree reduction over a slice of partials.
pub(crate) fn tree_reduce<T: Copy + Add<Output = T>>(items: &[T], zero: T) -> T {
    match items.len() {
        0 => zero,
        1 => items[0],
        n => {
            let mid = n / 2;
            tree_reduce(&items[..mid], zero) + tree_reduce(&items[mid..], zero)
        }
    }
}

/// Sums `chunk_fn` over the fixed chunking of `0..len`.
pub(crate) fn chunked_sum<T, F>(len: usize, zero: T, chunk_fn: F) -> T
where
    T: Copy + Add<Output = T> + Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let partials = map_chunks(len, chunk_fn);
    tree_reduce(&partials, zero)
}

/// Maps `chunk_fn` over the fixed chunking of `0..len`, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_chunks<T, F>(len: usize, chunk_fn: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let ranges: Vec<Range<usize>> = chunk_ranges(len).collect();
    ranges.into_par_iter().map(chunk_fn).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_chunks<T, F>(len: usize, chunk_fn: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    chunk_ranges(len).map(chunk_fn).collect()
}
