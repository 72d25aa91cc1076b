//! Chunked map over particle indices, parallel with the `parallel` feature.
//!
//! Chunk boundaries depend only on the particle count, and results come back
//! in chunk order, so callers that fold them in order get identical output
//! for any thread count.

use std::ops::Range;

/// Particles per work item.
pub const CHUNK: usize = 256;

fn chunk_range(c: usize, n: usize) -> Range<usize> {
    c * CHUNK..((c + 1) * CHUNK).min(n)
}

/// Applies `f` to consecutive index ranges covering `0..n`, returning the
/// per-chunk results in index order.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| f(chunk_range(c, n)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    (0..n.div_ceil(CHUNK))
        .map(|c| f(chunk_range(c, n)))
        .collect()
}
