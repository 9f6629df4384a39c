//! Worker-pool sizing. `INTERFERENCE_LAB_THREADS` caps parallelism; unset or
//! `0` leaves the choice to rayon.

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "INTERFERENCE_LAB_THREADS";

pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

pub fn build_pool(threads: Option<usize>) -> ThreadPool {
    let mut builder = ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder.build().expect("thread pool")
}

/// Runs `f` on a pool sized from the environment.
pub fn install<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    build_pool(configured_threads()).install(f)
}
