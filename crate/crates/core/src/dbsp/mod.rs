//! Distance-based sporadic prefetcher.
//!
//! Request histories move through three bounded tables:
//!
//! - the record table collects arrival timestamps of keys seen fewer than
//!   `l_min` times, evicting the least recently updated row when full;
//! - the compute table receives a key once it has `l_min` stamps and keeps
//!   appending up to `l_max` (one more arrival drops the row);
//! - when the compute table is full, every row is compared with the next
//!   `lookahead` rows in insertion order, the positive association degrees
//!   are merged into the prefetch table, and the compute table is cleared.
//!
//! The prefetch table maps a key to its best `container_size` associations
//! and is what lookups return.

mod container;
mod degree;

use serde::{Deserialize, Serialize};

pub use container::{AssocContainer, AssocEntry};
pub use degree::{association_degree, Degree, Distance};

use crate::harness::Prefetcher;
use crate::table::LinkedTable;
use crate::{Error, Result};

/// Key → arrival timestamps, oldest first.
pub type HistoryTable = LinkedTable<u64, Vec<u64>>;
/// Key → associations, least recently used row first.
pub type PrefetchTable = LinkedTable<u64, AssocContainer>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbspConfig {
    /// Record table rows.
    pub nr_r: usize,
    /// Compute table rows.
    pub nr_c: usize,
    /// Prefetch table rows.
    pub nr_p: usize,
    pub lookahead: usize,
    /// Associations kept per prefetch table row.
    pub container_size: usize,
    pub l_min: usize,
    pub l_max: usize,
    pub distance: Distance,
    /// When false, tables still learn but lookups return nothing.
    pub prefetch: bool,
}

impl DbspConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.nr_r == 0 || self.nr_c == 0 || self.nr_p == 0 {
            return fail("table row counts must be positive".into());
        }
        if self.lookahead == 0 || self.container_size == 0 {
            return fail("lookahead and container size must be positive".into());
        }
        if self.l_min < 2 {
            return fail(format!(
                "l_min = {} but associations need at least two repetitions (l_min >= 2)",
                self.l_min
            ));
        }
        if self.l_max <= self.l_min {
            return fail(format!(
                "l_max ({}) must exceed l_min ({})",
                self.l_max, self.l_min
            ));
        }
        if self.lookahead > self.nr_c {
            return fail(format!(
                "lookahead ({}) exceeds compute table rows ({})",
                self.lookahead, self.nr_c
            ));
        }
        Ok(())
    }
}

/// Compares each compute-table row with the next `lookahead` rows and merges
/// every positive degree into the prefetch table.
///
/// Rows are created on first insert, evicting the least recently used
/// prefetch row at capacity.
pub fn compute_associated_requests(
    ctable: &HistoryTable,
    ptable: &mut PrefetchTable,
    distance: Distance,
    container_size: usize,
    lookahead: usize,
) {
    let rows: Vec<(u64, &[u64])> = ctable.iter().map(|(k, h)| (*k, h.as_slice())).collect();
    for (i, &(src, src_hist)) in rows.iter().enumerate() {
        for &(dst, dst_hist) in rows.iter().skip(i + 1).take(lookahead) {
            let degree = association_degree(src_hist, dst_hist, distance);
            if degree.is_zero() {
                continue;
            }
            match ptable.get_mut(&src) {
                Some(container) => {
                    container.insert(dst, degree);
                    ptable.touch(&src);
                }
                None => {
                    let mut container = AssocContainer::new(container_size);
                    container.insert(dst, degree);
                    ptable.insert(src, container);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dbsp {
    config: DbspConfig,
    rtable: HistoryTable,
    ctable: HistoryTable,
    ptable: PrefetchTable,
    last_ts: Option<u64>,
    mining_passes: u64,
}

impl Dbsp {
    pub fn new(config: DbspConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rtable: LinkedTable::new(config.nr_r),
            ctable: LinkedTable::new(config.nr_c),
            ptable: LinkedTable::new(config.nr_p),
            last_ts: None,
            mining_passes: 0,
        })
    }

    pub fn config(&self) -> &DbspConfig {
        &self.config
    }

    pub fn record_table(&self) -> &HistoryTable {
        &self.rtable
    }

    pub fn compute_table(&self) -> &HistoryTable {
        &self.ctable
    }

    pub fn prefetch_table(&self) -> &PrefetchTable {
        &self.ptable
    }

    /// Direct access for seeding a known prefetch-table state.
    pub fn prefetch_table_mut(&mut self) -> &mut PrefetchTable {
        &mut self.ptable
    }

    pub fn mining_passes(&self) -> u64 {
        self.mining_passes
    }

    /// Records the arrival of `key` at `ts` and returns its associations,
    /// highest degree first, if prefetching is enabled and any are known.
    ///
    /// # Panics
    ///
    /// Panics in debug builds if `ts` does not increase.
    pub fn on_request(&mut self, key: u64, ts: u64) -> Option<Vec<AssocEntry>> {
        debug_assert!(
            self.last_ts.is_none_or(|t| ts > t),
            "timestamps must increase"
        );
        self.last_ts = Some(ts);
        self.prefetch_engine(key, ts);
        if !self.config.prefetch {
            return None;
        }
        let entries = self.ptable.get(&key)?.entries();
        self.ptable.touch(&key);
        Some(entries)
    }

    fn prefetch_engine(&mut self, key: u64, ts: u64) {
        if let Some(history) = self.rtable.get_mut(&key) {
            history.push(ts);
            if history.len() == self.config.l_min {
                let history = self.rtable.remove(&key).expect("row present");
                self.ctable.insert(key, history);
            } else {
                self.rtable.touch(&key);
            }
        } else if let Some(history) = self.ctable.get_mut(&key) {
            if history.len() == self.config.l_max {
                self.ctable.remove(&key);
            } else {
                history.push(ts);
            }
        } else {
            self.rtable.insert(key, vec![ts]);
        }

        if self.ctable.is_full() {
            compute_associated_requests(
                &self.ctable,
                &mut self.ptable,
                self.config.distance,
                self.config.container_size,
                self.config.lookahead,
            );
            self.ctable.clear();
            self.mining_passes += 1;
        }
    }
}

impl Prefetcher for Dbsp {
    fn on_request(&mut self, key: u64, ts: u64) -> Vec<u64> {
        Dbsp::on_request(self, key, ts)
            .map(|entries| entries.into_iter().map(|e| e.assoc_key).collect())
            .unwrap_or_default()
    }
}
