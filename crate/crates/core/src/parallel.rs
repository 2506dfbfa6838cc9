//! Worker-pool plumbing. `HDTEST_THREADS` caps the number of Monte Carlo
//! workers; results never depend on the pool size because every replication
//! draws from its own substream and tallies merge associatively.

pub(crate) fn thread_cap() -> Option<usize> {
    std::env::var("HDTEST_THREADS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&k| k >= 1)
}

/// Run `f` inside a pool capped by `HDTEST_THREADS`, or on the global pool
/// when the variable is unset.
pub(crate) fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_cap() {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}
