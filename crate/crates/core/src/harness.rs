//! Prefetcher evaluation.
//!
//! Every trace is replayed twice. The baseline run gives an LRU cache the
//! whole fast-memory budget and no prefetcher. The treatment run gives the
//! prefetcher its share of that budget and the cache the rest. CHR and
//! precision come from the treatment run; SAR compares the blocks the two
//! runs fetched from storage.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cache::{BlockCache, CacheCounters};
use crate::dbsp::{Dbsp, DbspConfig, Distance};
use crate::metrics::RunMetrics;
use crate::trace::{Trace, DEFAULT_BLOCK_SIZE};
use crate::{Error, Result};

/// Anything that sees every demand read and may name keys to prefetch.
pub trait Prefetcher {
    /// Called before the demand access of `key`. Returns associated keys,
    /// most confident first.
    fn on_request(&mut self, key: u64, ts: u64) -> Vec<u64>;
}

/// Never predicts anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullPrefetcher;

impl Prefetcher for NullPrefetcher {
    fn on_request(&mut self, _key: u64, _ts: u64) -> Vec<u64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Prefetch every returned association.
    #[default]
    Always,
}

/// DBSP settings that do not depend on the memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbspParams {
    pub lookahead: usize,
    pub container_size: usize,
    pub l_min: usize,
    pub l_max: usize,
    pub distance: Distance,
}

impl Default for DbspParams {
    fn default() -> Self {
        Self {
            lookahead: 4,
            container_size: 3,
            l_min: 2,
            l_max: 4,
            distance: Distance::Manhattan,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Fast memory as a fraction of the storage size.
    pub cache_pct: f64,
    /// Share of fast memory given to the prefetcher.
    pub pref_rel_size: f64,
    pub block_size: u64,
    /// Record / compute / prefetch table shares of the prefetcher memory.
    pub table_split: [f64; 3],
    pub dbsp: DbspParams,
    pub policy: Policy,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cache_pct: 0.01,
            pref_rel_size: 0.1,
            block_size: DEFAULT_BLOCK_SIZE,
            table_split: [1.0 / 3.0; 3],
            dbsp: DbspParams::default(),
            policy: Policy::Always,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.cache_pct > 0.0 && self.cache_pct <= 1.0) {
            return fail(format!("cache_pct {} must be in (0, 1]", self.cache_pct));
        }
        if !(self.pref_rel_size >= 0.0 && self.pref_rel_size < 1.0) {
            return fail(format!(
                "pref_rel_size {} must be in [0, 1)",
                self.pref_rel_size
            ));
        }
        if !self.block_size.is_power_of_two() {
            return fail(format!(
                "block size {} is not a power of two",
                self.block_size
            ));
        }
        if self.table_split.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return fail("table split shares must be positive".into());
        }
        let sum: f64 = self.table_split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("table split sums to {sum}, not 1"));
        }
        if self.dbsp.l_min < 2 {
            return fail(format!(
                "l_min = {} but associations need at least two repetitions (l_min >= 2)",
                self.dbsp.l_min
            ));
        }
        if self.dbsp.l_max <= self.dbsp.l_min {
            return fail(format!(
                "l_max ({}) must exceed l_min ({})",
                self.dbsp.l_max, self.dbsp.l_min
            ));
        }
        if self.dbsp.lookahead == 0 || self.dbsp.container_size == 0 {
            return fail("lookahead and container size must be positive".into());
        }
        Ok(())
    }
}

/// Fast-memory split for one trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub memory_bytes: u64,
    pub prefetcher_bytes: u64,
    /// Cache size in the baseline run (all of the memory).
    pub baseline_blocks: u64,
    /// Cache size next to the prefetcher.
    pub cache_blocks: u64,
    pub nr_r: usize,
    pub nr_c: usize,
    pub nr_p: usize,
}

impl Budget {
    /// DBSP configuration sized to this budget. The lookahead is capped at
    /// the compute table size.
    pub fn dbsp_config(&self, params: &DbspParams) -> DbspConfig {
        DbspConfig {
            nr_r: self.nr_r,
            nr_c: self.nr_c,
            nr_p: self.nr_p,
            lookahead: params.lookahead.min(self.nr_c),
            container_size: params.container_size,
            l_min: params.l_min,
            l_max: params.l_max,
            distance: params.distance,
            prefetch: true,
        }
    }
}

/// Splits fast memory between the cache and the prefetcher tables.
///
/// Row costs assume 8-byte keys and timestamps: a record row holds a key
/// and `l_min` stamps, a compute row a key and `l_max` stamps, a prefetch
/// row a key and `container_size` (key, degree) pairs.
pub fn budget(storage_blocks: u64, cfg: &SimConfig) -> Result<Budget> {
    if storage_blocks == 0 {
        return Err(Error::Config("storage size must be positive".into()));
    }
    let bs = cfg.block_size;
    let memory = (cfg.cache_pct * storage_blocks as f64 * bs as f64).round() as u64;
    let prefetcher = (cfg.pref_rel_size * memory as f64).round() as u64;
    let baseline_blocks = memory / bs;
    let cache_blocks = (memory - prefetcher) / bs;
    if cache_blocks == 0 {
        return Err(Error::CacheTooSmall {
            bytes: memory - prefetcher,
            block_size: bs,
        });
    }
    let p = &cfg.dbsp;
    let costs = [
        8 * (1 + p.l_min as u64),
        8 * (1 + p.l_max as u64),
        8 * (1 + 2 * p.container_size as u64),
    ];
    let rows = |i: usize| -> usize {
        let r = (cfg.table_split[i] * prefetcher as f64 / costs[i] as f64).floor();
        (r as usize).max(1)
    };
    Ok(Budget {
        memory_bytes: memory,
        prefetcher_bytes: prefetcher,
        baseline_blocks,
        cache_blocks,
        nr_r: rows(0),
        nr_c: rows(1),
        nr_p: rows(2),
    })
}

/// Replays `trace` through an LRU cache of `capacity_blocks`, consulting the
/// prefetcher before each demand access.
///
/// Under the Always policy every returned association except the
/// triggering key is prefetched, using the size that key was last read
/// with. Associations that cannot fit in the cache are skipped.
pub fn replay(
    trace: &Trace,
    capacity_blocks: u64,
    prefetcher: &mut dyn Prefetcher,
) -> Result<CacheCounters> {
    let mut cache = BlockCache::new(capacity_blocks)?;
    let mut last_size: HashMap<u64, u64> = HashMap::new();
    let mut next_prefetch_id = 0u64;
    for req in &trace.reads {
        let assoc = prefetcher.on_request(req.key, req.ts);
        last_size.insert(req.key, req.size_blocks);
        for key in assoc {
            if key == req.key {
                continue;
            }
            let size = last_size.get(&key).copied().unwrap_or(1);
            if size > capacity_blocks {
                continue;
            }
            cache.admit_prefetch(key, size, next_prefetch_id)?;
            next_prefetch_id += 1;
        }
        cache.access(req)?;
    }
    Ok(cache.counters())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub trace_name: String,
    pub chr: f64,
    pub precision: f64,
    pub sar: f64,
    pub counters: RunMetrics,
    pub budget: Budget,
}

impl TraceResult {
    fn from_counters(
        trace: &Trace,
        treatment: CacheCounters,
        baseline: CacheCounters,
        budget: Budget,
    ) -> Result<Self> {
        let counters = RunMetrics {
            n_ch: treatment.n_ch,
            n_cm: treatment.n_cm,
            n_pr: treatment.n_pr,
            n_eu: treatment.n_eu,
            n_dp_blocks: treatment.n_dp_blocks,
            n_dc_blocks: baseline.n_dp_blocks,
        };
        Ok(Self {
            trace_name: trace.name.clone(),
            chr: counters.chr()?,
            precision: counters.precision(),
            sar: counters.sar()?,
            counters,
            budget,
        })
    }
}

/// Which prefetcher sits next to the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Plain LRU, no prefetcher.
    Lru,
    /// DBSP configured from [`SimConfig::dbsp`].
    Dbsp,
}

impl Family {
    /// Label used in result files: `LRU`, `DBSP_f1` or `DBSP_f2`.
    pub fn label(self, distance: Distance) -> String {
        match self {
            Family::Lru => "LRU".to_owned(),
            Family::Dbsp => format!("DBSP_{}", distance.label()),
        }
    }
}

/// Runs the baseline and treatment replays for one trace, building the
/// prefetcher from the trace's budget.
pub fn get_target_metrics_with<F>(
    trace: &Trace,
    cfg: &SimConfig,
    make_prefetcher: F,
) -> Result<TraceResult>
where
    F: FnOnce(&Budget) -> Result<Box<dyn Prefetcher>>,
{
    cfg.validate()?;
    if trace.is_empty() {
        return Err(Error::NoReads(trace.name.clone()));
    }
    let budget = budget(trace.storage_blocks, cfg)?;
    let baseline = replay(trace, budget.baseline_blocks, &mut NullPrefetcher)?;
    let mut prefetcher = make_prefetcher(&budget)?;
    let treatment = replay(trace, budget.cache_blocks, prefetcher.as_mut())?;
    TraceResult::from_counters(trace, treatment, baseline, budget)
}

pub fn get_target_metrics(family: Family, trace: &Trace, cfg: &SimConfig) -> Result<TraceResult> {
    get_target_metrics_with(trace, cfg, |budget| -> Result<Box<dyn Prefetcher>> {
        match family {
            Family::Lru => Ok(Box::new(NullPrefetcher)),
            Family::Dbsp => Ok(Box::new(Dbsp::new(budget.dbsp_config(&cfg.dbsp))?)),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_trace: Vec<TraceResult>,
    pub avg_chr: f64,
    pub avg_sar: f64,
    pub avg_precision: f64,
}

impl EvalResult {
    /// Unweighted means over the per-trace results.
    pub fn from_results(per_trace: Vec<TraceResult>) -> Result<Self> {
        if per_trace.is_empty() {
            return Err(Error::Config("no traces to evaluate".into()));
        }
        let n = per_trace.len() as f64;
        let mean = |f: fn(&TraceResult) -> f64| per_trace.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            avg_chr: mean(|r| r.chr),
            avg_sar: mean(|r| r.sar),
            avg_precision: mean(|r| r.precision),
            per_trace,
        })
    }
}

pub fn evaluate_prefetcher(
    family: Family,
    traces: &[Trace],
    cfg: &SimConfig,
) -> Result<EvalResult> {
    if traces.is_empty() {
        return Err(Error::Config("no traces to evaluate".into()));
    }
    let per_trace = traces
        .iter()
        .map(|t| get_target_metrics(family, t, cfg).map_err(|e| e.in_trace(&t.name)))
        .collect::<Result<Vec<_>>>()?;
    EvalResult::from_results(per_trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Orders `a` before `b` when `a` is the better value.
    fn better_first(self, a: f64, b: f64) -> Ordering {
        match self {
            Direction::Maximize => b.total_cmp(&a),
            Direction::Minimize => a.total_cmp(&b),
        }
    }
}

/// Indices of the non-dominated points, CHR (x) maximized and y in the
/// given direction, sorted by x ascending. Of several identical points only
/// the lowest index is kept.
pub fn pareto_front_indices(points: &[(f64, f64)], y: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // x descending, then best y first, then index
    order.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(y.better_first(points[a].1, points[b].1))
            .then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best_y: Option<f64> = None;
    let mut i = 0;
    while i < order.len() {
        let lead = order[i];
        let x = points[lead].0;
        // only the first of an equal-x group can survive
        if best_y.is_none_or(|b| y.better_first(points[lead].1, b) == Ordering::Less) {
            front.push(lead);
            best_y = Some(points[lead].1);
        }
        while i < order.len() && points[order[i]].0.total_cmp(&x) == Ordering::Equal {
            i += 1;
        }
    }
    front.reverse();
    front
}

pub fn pareto_front(points: &[(f64, f64)], y: Direction) -> Vec<(f64, f64)> {
    pareto_front_indices(points, y)
        .into_iter()
        .map(|i| points[i])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SCurveMetric {
    Chr,
    Precision,
}

impl SCurveMetric {
    pub fn of(self, r: &TraceResult) -> f64 {
        match self {
            SCurveMetric::Chr => r.chr,
            SCurveMetric::Precision => r.precision,
        }
    }
}

/// Per-trace metric table: one column per configuration, rows ordered by
/// the reference column ascending (ties by trace name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurve {
    pub columns: Vec<String>,
    pub reference: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Builds an s-curve from `(config_id, per-trace results)` columns. Every
/// column must list the same traces in the same order.
pub fn s_curve(
    columns: &[(String, Vec<TraceResult>)],
    metric: SCurveMetric,
    reference: usize,
) -> Result<SCurve> {
    let Some((_, first)) = columns.first() else {
        return Ok(SCurve {
            columns: Vec::new(),
            reference: 0,
            rows: Vec::new(),
        });
    };
    if reference >= columns.len() {
        return Err(Error::Config(format!(
            "reference column {reference} out of range"
        )));
    }
    for (id, results) in columns {
        let same = results.len() == first.len()
            && results
                .iter()
                .zip(first)
                .all(|(a, b)| a.trace_name == b.trace_name);
        if !same {
            return Err(Error::Config(format!(
                "configuration `{id}` covers different traces"
            )));
        }
    }
    let mut rows: Vec<(String, Vec<f64>)> = first
        .iter()
        .enumerate()
        .map(|(t, r)| {
            let values = columns.iter().map(|(_, rs)| metric.of(&rs[t])).collect();
            (r.trace_name.clone(), values)
        })
        .collect();
    rows.sort_by(|a, b| {
        a.1[reference]
            .total_cmp(&b.1[reference])
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(SCurve {
        columns: columns.iter().map(|(id, _)| id.clone()).collect(),
        reference,
        rows,
    })
}
