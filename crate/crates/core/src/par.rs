//! Per-index maps that run on the rayon pool when `std` is enabled.
//! Outputs are collected in index order, so reductions stay deterministic.

use alloc::vec::Vec;

#[cfg(feature = "std")]
pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if len < 512 {
        return (0..len).map(f).collect();
    }
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Fills `out` in chunks of `width`, chunk `i` computed by `f(i, chunk)`.
#[cfg(feature = "std")]
pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if out.len() < 512 * width {
        out.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    out.par_chunks_mut(width)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "std"))]
pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    out.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
}
