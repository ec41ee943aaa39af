//! Row-parallel helpers.
//!
//! Parallelism is restricted to elementwise/Jacobi-style writes where every
//! row is computed independently from read-only inputs, so the multithreaded
//! result is bit-identical to the sequential one. Reductions stay sequential
//! for the same reason.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f(row_index, row_slice)` to every row of a row-major buffer.
pub(crate) fn for_each_row<F>(buf: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    buf.par_chunks_mut(width)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
    #[cfg(not(feature = "parallel"))]
    buf.chunks_mut(width).enumerate().for_each(|(r, row)| f(r, row));
}

/// Like [`for_each_row`] but over two equally shaped buffers at once.
pub(crate) fn for_each_row2<F>(a: &mut [f64], b: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(width)
        .zip(b.par_chunks_mut(width))
        .enumerate()
        .for_each(|(r, (ra, rb))| f(r, ra, rb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(width)
        .zip(b.chunks_mut(width))
        .enumerate()
        .for_each(|(r, (ra, rb))| f(r, ra, rb));
}
