//! Chunked per-patch loops, run on rayon when the `parallel` feature is on.
//!
//! Every helper here writes disjoint output chunks, so the parallel and
//! sequential paths produce bit-identical results. Inputs shorter than
//! `PARALLEL_MIN_LEN` always take the sequential path; dispatch costs more
//! than the work there.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
const PARALLEL_MIN_LEN: usize = 4096;

/// Calls `f(index, out_chunk)` for each `chunk`-sized piece of `out`.
pub(crate) fn for_each_chunk_mut<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PARALLEL_MIN_LEN {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Fallible variant of [`for_each_chunk_mut`]; returns the error of the
/// lowest failing chunk index.
pub(crate) fn try_for_each_chunk_mut<E, F>(out: &mut [f64], chunk: usize, f: F) -> Result<(), E>
where
    E: Send,
    F: Fn(usize, &mut [f64]) -> Result<(), E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= PARALLEL_MIN_LEN {
        let results: Vec<Result<(), E>> = out
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        return results.into_iter().collect();
    }
    out.chunks_mut(chunk)
        .enumerate()
        .try_for_each(|(i, c)| f(i, c))
}

/// Maps `0..len` through `f` into a vector, in index order.
pub(crate) fn map_indices<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if len >= PARALLEL_MIN_LEN {
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}
