//! Trace-driven storage cache simulator for sporadic read prefetching.
//!
//! The crate replays block I/O traces through an LRU cache, optionally
//! paired with the distance-based sporadic prefetcher (DBSP), and reports
//! cache hit ratio, prefetch precision and storage activity ratio.
//!
//! - [`trace`]: MSR-Cambridge ingestion and synthetic trace generation
//! - [`cache`]: block-granular LRU cache with prefetch bookkeeping
//! - [`dbsp`]: record/compute/prefetch tables and association mining
//! - [`metrics`]: CHR, precision and SAR formulas
//! - [`harness`]: paired replays, memory budgeting, Pareto fronts, s-curves
//! - [`sweep`]: parameter sweeps and result files

pub mod cache;
pub mod dbsp;
mod error;
pub mod harness;
pub mod metrics;
pub mod sweep;
pub mod table;
pub mod trace;

pub use error::{Error, Result};
