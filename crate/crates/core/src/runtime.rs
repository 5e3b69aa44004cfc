//! Thread-pool configuration.

use crate::error::{Error, Result};

/// Environment variable holding the worker count; `1` is the reference mode.
pub const THREADS_ENV: &str = "FRAMEREG_THREADS";

/// Reads [`THREADS_ENV`] (default 1) and configures rayon and faer.
///
/// Only the first call configures the global rayon pool; later calls keep it.
pub fn configure_threads() -> Result<usize> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
        Err(_) => 1,
    };
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    Ok(n)
}
