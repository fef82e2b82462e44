//! Worker-count control. Results never depend on the worker count: work is
//! split into fixed blocks and reassembled in block order.

use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ITERLAB_THREADS";

/// Worker count from `ITERLAB_THREADS`, defaulting to the available
/// parallelism.
pub fn configured_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
