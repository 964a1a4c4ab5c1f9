//! Worker pool shared by the Monte-Carlo drivers and per-sample gradient fan-out.
//!
//! The pool size comes from `TIMEBRIDGE_THREADS` (read once, on first use),
//! defaulting to the machine's available parallelism. Every parallel result in
//! the crate is reduced in a fixed order, so the thread count never changes
//! numbers, only speed.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "TIMEBRIDGE_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        ThreadPoolBuilder::new()
            .num_threads(thread_count())
            .thread_name(|i| format!("timebridge-{i}"))
            .build()
            .expect("failed to start worker pool")
    })
}
