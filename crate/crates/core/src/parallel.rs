//! Ordered parallel map over independent tasks.

use rayon::prelude::*;

/// Evaluates `f(0..tasks)` on `workers` threads (`0` = all cores, `1` = the
/// calling thread only) and returns the results in task order.
pub fn map_ordered<T, F>(workers: usize, tasks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == 1 || tasks <= 1 {
        return (0..tasks).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| (0..tasks).into_par_iter().map(f).collect())
}
