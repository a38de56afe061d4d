//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they are plain iterator loops. Either way results come back in input
//! order, so reductions performed by callers are reproducible.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Whether this build dispatches work to a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
