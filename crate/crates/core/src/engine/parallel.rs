//! Ordered data-parallel map with a sequential fallback.
//!
//! Results are always returned in index order, so any reduction performed
//! over them afterwards is independent of the number of worker threads.

/// Evaluate `f(0), ..., f(n - 1)`.
///
/// `workers == 1` runs on the calling thread, `workers == 0` uses the global
/// rayon pool and any other value builds a dedicated pool of that size. Without
/// the `parallel` feature every call is sequential.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
        if workers == 0 {
            return run();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(run),
            Err(_) => return run(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n).map(f).collect()
}

/// Whether this build can run work on more than one thread.
pub const fn is_parallel_build() -> bool {
    cfg!(feature = "parallel")
}
