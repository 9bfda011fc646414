//! Data-parallel map helper with a sequential fallback.
//!
//! All embarrassingly parallel loops (ensembles, quadrature sweeps, Monte
//! Carlo estimators) go through [`map_indexed`]. With the `parallel` feature
//! (default) it fans out over rayon; without it the same closure runs
//! sequentially. Results are collected in index order either way, so callers
//! that reduce sequentially afterwards get bit-identical output regardless
//! of feature or worker count.

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential version, always available; the criterion bench compares this
/// against the parallel path.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
