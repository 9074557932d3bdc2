//! Batch execution of independent jobs (benchmark grids, parameter sweeps).
//!
//! Individual solves are single-threaded by contract; parallelism lives
//! here, across jobs. With the default `parallel` feature the mapping runs
//! on a rayon pool; without it, everything falls back to the sequential
//! path with the same API and ordering. Results are always returned in job
//! order regardless of execution order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over 0..count sequentially.
pub fn map_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Maps `f` over 0..count on the current rayon pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Maps `f` over 0..count, in parallel when the feature allows it.
pub fn map_auto<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(count, f)
    }
}

/// Runs `g` inside a dedicated pool of `jobs` threads (`None` = available
/// parallelism). Without the `parallel` feature `g` simply runs on the
/// calling thread and `jobs` is ignored.
pub fn with_pool<T, G>(jobs: Option<usize>, g: G) -> T
where
    T: Send,
    G: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j.max(1));
        }
        match builder.build() {
            Ok(pool) => pool.install(g),
            // Pool creation can only fail in exotic environments; degrade to
            // the caller's thread rather than aborting the run.
            Err(_) => g(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        g()
    }
}
