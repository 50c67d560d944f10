//! Block-granular LRU cache with prefetch-aware admission.
//!
//! A demand request hits only when every block it spans is resident. Misses
//! fetch the missing blocks; prefetches fetch whatever part of a span is not
//! already resident. Every fetched block counts toward `n_dp_blocks`.
//!
//! Prefetch waste is tracked per prefetch request: a request counts toward
//! `n_eu` once all of the blocks it admitted have been evicted and none of
//! them was ever read by a demand request.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::table::LinkedTable;
use crate::trace::ReadRequest;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockState {
    pub block: u64,
    pub prefetched: bool,
    pub touched: bool,
    pub origin_prefetch_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    Miss { missing_blocks: u64 },
}

impl Access {
    pub fn is_hit(self) -> bool {
        matches!(self, Access::Hit)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounters {
    pub n_ch: u64,
    pub n_cm: u64,
    pub n_dp_blocks: u64,
    pub n_pr: u64,
    pub n_eu: u64,
}

#[derive(Debug, Clone, Copy)]
struct PrefetchRecord {
    /// Admitted blocks of this prefetch still resident.
    live: u64,
    touched: bool,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    capacity: u64,
    resident: LinkedTable<u64, BlockState>,
    prefetches: HashMap<u64, PrefetchRecord>,
    counters: CacheCounters,
}

impl BlockCache {
    pub fn new(capacity_blocks: u64) -> Result<Self> {
        if capacity_blocks == 0 {
            return Err(Error::Config(
                "cache capacity must be at least one block".into(),
            ));
        }
        let rows = usize::try_from(capacity_blocks)
            .map_err(|_| Error::Config("cache capacity exceeds address space".into()))?;
        Ok(Self {
            capacity: capacity_blocks,
            resident: LinkedTable::new(rows),
            prefetches: HashMap::new(),
            counters: CacheCounters::default(),
        })
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn len(&self) -> u64 {
        self.resident.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn counters(&self) -> CacheCounters {
        self.counters
    }

    pub fn contains(&self, block: u64) -> bool {
        self.resident.contains(&block)
    }

    pub fn block_state(&self, block: u64) -> Option<&BlockState> {
        self.resident.get(&block)
    }

    /// Resident blocks from least to most recently used.
    pub fn lru_order(&self) -> impl Iterator<Item = u64> + '_ {
        self.resident.keys().copied()
    }

    /// Serves a demand read.
    pub fn access(&mut self, request: &ReadRequest) -> Result<Access> {
        self.check_fits(request.size_blocks)?;
        let hit = request.blocks().all(|b| self.resident.contains(&b));
        let mut missing = 0;
        for block in request.blocks() {
            if let Some(state) = self.resident.get_mut(&block) {
                if state.prefetched && !state.touched {
                    state.touched = true;
                    if let Some(record) = state
                        .origin_prefetch_id
                        .and_then(|id| self.prefetches.get_mut(&id))
                    {
                        record.touched = true;
                    }
                }
                self.resident.touch(&block);
            } else {
                missing += 1;
                self.admit(BlockState {
                    block,
                    prefetched: false,
                    touched: false,
                    origin_prefetch_id: None,
                });
            }
        }
        self.counters.n_dp_blocks += missing;
        if hit {
            self.counters.n_ch += 1;
            Ok(Access::Hit)
        } else {
            self.counters.n_cm += 1;
            Ok(Access::Miss {
                missing_blocks: missing,
            })
        }
    }

    /// Prefetches the span `[key, key + size_blocks)`. Already-resident
    /// blocks are left where they are. Returns the number of blocks fetched.
    pub fn admit_prefetch(&mut self, key: u64, size_blocks: u64, prefetch_id: u64) -> Result<u64> {
        self.check_fits(size_blocks)?;
        let mut admitted = 0;
        for block in key..key + size_blocks {
            if self.resident.contains(&block) {
                continue;
            }
            self.prefetches
                .entry(prefetch_id)
                .or_insert(PrefetchRecord {
                    live: 0,
                    touched: false,
                })
                .live += 1;
            admitted += 1;
            self.admit(BlockState {
                block,
                prefetched: true,
                touched: false,
                origin_prefetch_id: Some(prefetch_id),
            });
        }
        if admitted > 0 {
            self.counters.n_pr += 1;
            self.counters.n_dp_blocks += admitted;
        }
        Ok(admitted)
    }

    fn check_fits(&self, size_blocks: u64) -> Result<()> {
        if size_blocks > self.capacity {
            Err(Error::RequestTooLarge {
                size: size_blocks,
                capacity: self.capacity,
            })
        } else {
            Ok(())
        }
    }

    fn admit(&mut self, state: BlockState) {
        if let Some((_, evicted)) = self.resident.insert(state.block, state) {
            self.on_evict(evicted);
        }
    }

    fn on_evict(&mut self, state: BlockState) {
        let Some(id) = state.origin_prefetch_id else {
            return;
        };
        let Some(record) = self.prefetches.get_mut(&id) else {
            return;
        };
        record.live -= 1;
        if record.live == 0 {
            if !record.touched {
                self.counters.n_eu += 1;
            }
            self.prefetches.remove(&id);
        }
    }
}
