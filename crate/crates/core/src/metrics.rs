//! Cache hit ratio, prefetch precision and storage activity ratio.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fraction of demand requests served entirely from cache.
pub fn chr(n_ch: u64, n_cm: u64) -> Result<f64> {
    let total = n_ch + n_cm;
    if total == 0 {
        return Err(Error::NoAccesses);
    }
    Ok(n_ch as f64 / total as f64)
}

/// Fraction of prefetch requests that were not evicted untouched.
///
/// A run that never prefetched has precision 1.
pub fn precision(n_pr: u64, n_eu: u64) -> f64 {
    if n_pr == 0 {
        return 1.0;
    }
    (n_pr - n_eu.min(n_pr)) as f64 / n_pr as f64
}

/// Blocks fetched from storage with the prefetcher over blocks fetched by the
/// cache-only baseline.
pub fn sar(n_dp_blocks: u64, n_dc_blocks: u64) -> Result<f64> {
    if n_dc_blocks == 0 {
        return Err(Error::NoBaselineDownloads);
    }
    Ok(n_dp_blocks as f64 / n_dc_blocks as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_ch: u64,
    pub n_cm: u64,
    pub n_pr: u64,
    pub n_eu: u64,
    /// Blocks downloaded by the cache + prefetcher run.
    pub n_dp_blocks: u64,
    /// Blocks downloaded by the paired cache-only run.
    pub n_dc_blocks: u64,
}

impl RunMetrics {
    pub fn accesses(&self) -> u64 {
        self.n_ch + self.n_cm
    }

    pub fn chr(&self) -> Result<f64> {
        chr(self.n_ch, self.n_cm)
    }

    pub fn precision(&self) -> f64 {
        precision(self.n_pr, self.n_eu)
    }

    pub fn sar(&self) -> Result<f64> {
        sar(self.n_dp_blocks, self.n_dc_blocks)
    }
}
