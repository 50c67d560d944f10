//! Acceptance criteria. Each test prints one PASS/FAIL line; run with
//! `cargo test -p dbsp-core --test acceptance -- --nocapture` to see them.

use std::collections::HashMap;
use std::fs;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dbsp_core::cache::BlockCache;
use dbsp_core::dbsp::{
    association_degree, compute_associated_requests, Degree, Distance, HistoryTable, PrefetchTable,
};
use dbsp_core::harness::{
    get_target_metrics, replay, DbspParams, Family, NullPrefetcher, SimConfig,
};
use dbsp_core::metrics;
use dbsp_core::sweep::{run_sweep, validate_config, RawFlags};
use dbsp_core::table::LinkedTable;
use dbsp_core::trace::{load_trace, synth_correlated_trace, ReadRequest, SynthSpec, Trace};

fn report(criterion: &str, ok: bool, detail: String) {
    println!(
        "[{}] {criterion}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{criterion} failed: {detail}");
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let took = started.elapsed();
    (
        took < limit,
        format!("{:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()),
    )
}

// ---------------------------------------------------------------------------
// Independent degree oracle: exact rationals from direct summation.

const SENTINEL: u128 = 1 << 63;

fn oracle_degree(a: &[u64], b: &[u64], normalised: bool) -> Ratio<u128> {
    if a.len() != b.len() || a.is_empty() || a[0] > b[0] {
        return Ratio::from_integer(0);
    }
    let mut d: u128 = 0;
    for i in 0..a.len() {
        d += a[i].abs_diff(b[i]) as u128;
    }
    if d == 0 {
        return Ratio::from_integer(SENTINEL);
    }
    if normalised {
        Ratio::new(a.len() as u128, d)
    } else {
        Ratio::new(1, d)
    }
}

fn as_ratio(d: Degree) -> Ratio<u128> {
    Ratio::new(d.numer() as u128, d.denom() as u128)
}

fn random_history(rng: &mut ChaCha8Rng, len: usize, start_max: u64, step_max: u64) -> Vec<u64> {
    let mut t = rng.gen_range(0..=start_max);
    (0..len)
        .map(|_| {
            let v = t;
            t += rng.gen_range(1..=step_max);
            v
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[test]
fn mining_matches_brute_force_top_k() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD8_5B);
    let mut states = 0;
    let mut mismatches = Vec::new();
    for _ in 0..500 {
        let nr_c = rng.gen_range(1..=32usize);
        let lookahead = rng.gen_range(1..=8usize.min(nr_c));
        let s_c = rng.gen_range(1..=7usize);
        let normalised = rng.gen_bool(0.5);
        let distance = if normalised {
            Distance::Normalized
        } else {
            Distance::Manhattan
        };

        let mut keys: Vec<u64> = Vec::new();
        while keys.len() < nr_c {
            let k = rng.gen_range(0..1000);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        // short, overlapping histories so guards, ties and zero distances occur
        let rows: Vec<(u64, Vec<u64>)> = keys
            .iter()
            .map(|&k| {
                let len = rng.gen_range(2..=4);
                (k, random_history(&mut rng, len, 6, 3))
            })
            .collect();
        let mut ctable: HistoryTable = LinkedTable::new(nr_c);
        for (k, h) in &rows {
            ctable.insert(*k, h.clone());
        }
        let mut ptable: PrefetchTable = LinkedTable::new(nr_c);
        compute_associated_requests(&ctable, &mut ptable, distance, s_c, lookahead);

        // oracle: all (i, j) with i < j <= i + l_a, keep top s_c by
        // (degree, later insertion)
        let mut expected: HashMap<u64, Vec<(u64, Ratio<u128>)>> = HashMap::new();
        for i in 0..rows.len() {
            let mut cands: Vec<(Ratio<u128>, usize, u64)> = Vec::new();
            for j in i + 1..=(i + lookahead).min(rows.len() - 1) {
                let deg = oracle_degree(&rows[i].1, &rows[j].1, normalised);
                if deg > Ratio::from_integer(0) {
                    cands.push((deg, j, rows[j].0));
                }
            }
            if cands.is_empty() {
                continue;
            }
            cands.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
            cands.truncate(s_c);
            let mut kept: Vec<(u64, Ratio<u128>)> =
                cands.into_iter().map(|(d, _, k)| (k, d)).collect();
            kept.sort();
            expected.insert(rows[i].0, kept);
        }

        let mut got: HashMap<u64, Vec<(u64, Ratio<u128>)>> = HashMap::new();
        for (k, c) in ptable.iter() {
            let mut entries: Vec<(u64, Ratio<u128>)> = c
                .entries()
                .iter()
                .map(|e| (e.assoc_key, as_ratio(e.degree)))
                .collect();
            entries.sort();
            got.insert(*k, entries);
        }
        if got != expected {
            mismatches.push(format!("nr_c={nr_c} l_a={lookahead} s_c={s_c} {distance}"));
        }
        states += 1;
    }
    let (fast, timing) = within(Duration::from_secs(10), started);
    report(
        "mining oracle equivalence",
        mismatches.is_empty() && fast,
        format!(
            "{states} states, {} mismatches {:?}, {timing}",
            mismatches.len(),
            mismatches.first()
        ),
    );
}

// ---------------------------------------------------------------------------

/// Explicit-list LRU over blocks, most recent last.
struct ReferenceCache {
    capacity: usize,
    list: Vec<u64>,
    downloaded: u64,
}

impl ReferenceCache {
    fn access(&mut self, r: &ReadRequest) -> bool {
        let hit = (r.key..r.key + r.size_blocks).all(|b| self.list.contains(&b));
        for b in r.key..r.key + r.size_blocks {
            if let Some(p) = self.list.iter().position(|&x| x == b) {
                self.list.remove(p);
            } else {
                self.downloaded += 1;
                if self.list.len() == self.capacity {
                    self.list.remove(0);
                }
            }
            self.list.push(b);
        }
        hit
    }
}

#[test]
fn lru_matches_explicit_list_reference() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut details = Vec::new();
    let mut ok = true;
    for (capacity, key_space, max_size) in [(64u64, 256u64, 4u64), (16, 40, 1), (100, 2000, 8)] {
        let reqs: Vec<ReadRequest> = (0..100_000u64)
            .map(|ts| ReadRequest {
                key: rng.gen_range(0..key_space),
                size_blocks: rng.gen_range(1..=max_size),
                ts,
            })
            .collect();
        let mut cache = BlockCache::new(capacity).unwrap();
        let mut reference = ReferenceCache {
            capacity: capacity as usize,
            list: Vec::new(),
            downloaded: 0,
        };
        let mut diverged = None;
        for (i, r) in reqs.iter().enumerate() {
            let got = cache.access(r).unwrap().is_hit();
            if got != reference.access(r) && diverged.is_none() {
                diverged = Some(i);
            }
        }
        let same_dp = cache.counters().n_dp_blocks == reference.downloaded;
        ok &= diverged.is_none() && same_dp;
        details.push(format!(
            "cap {capacity}: hits {} dp {} vs {}",
            cache.counters().n_ch,
            cache.counters().n_dp_blocks,
            reference.downloaded
        ));
    }
    let (fast, timing) = within(Duration::from_secs(10), started);
    report(
        "LRU reference equivalence",
        ok && fast,
        format!("{}; {timing}", details.join(", ")),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn degree_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    let mut bad = 0;
    let (mut guards, mut sentinels) = (0, 0);
    for i in 0..10_000 {
        let len_a = rng.gen_range(1..=6);
        let len_b = if rng.gen_bool(0.8) {
            len_a
        } else {
            rng.gen_range(1..=6)
        };
        let a = random_history(&mut rng, len_a, 50, 20);
        let b = match i % 10 {
            0 => a.clone(),
            _ => random_history(&mut rng, len_b, 50, 20),
        };
        for normalised in [false, true] {
            let dist = if normalised {
                Distance::Normalized
            } else {
                Distance::Manhattan
            };
            let got = as_ratio(association_degree(&a, &b, dist));
            let want = oracle_degree(&a, &b, normalised);
            if got != want {
                bad += 1;
            }
            if want == Ratio::from_integer(0) {
                guards += 1;
            }
            if want == Ratio::from_integer(SENTINEL) {
                sentinels += 1;
            }
            checked += 1;
        }
    }
    // explicit guard and sentinel cases
    let fixed = [
        (vec![4u64, 5], vec![2u64, 9], Ratio::from_integer(0)),
        (vec![1, 2, 3], vec![1, 2], Ratio::from_integer(0)),
        (vec![3, 8], vec![3, 8], Ratio::from_integer(SENTINEL)),
        (vec![1, 3], vec![2, 5], Ratio::new(1, 3)),
    ];
    for (a, b, want) in &fixed {
        if as_ratio(association_degree(a, b, Distance::Manhattan)) != *want {
            bad += 1;
        }
    }
    if as_ratio(association_degree(&[1, 3], &[2, 5], Distance::Normalized)) != Ratio::new(2, 3) {
        bad += 1;
    }

    // argmax agreement for equal-length, positive-distance candidates
    let mut argmax_bad = 0;
    for _ in 0..2_000 {
        let len = rng.gen_range(1..=6);
        let src = random_history(&mut rng, len, 10, 20);
        let cands: Vec<Vec<u64>> = (0..rng.gen_range(2..=8))
            .map(|_| {
                let mut h = random_history(&mut rng, len, 30, 20);
                h[0] = h[0].max(src[0]);
                if h == src {
                    h.iter_mut().for_each(|t| *t += 1);
                }
                h
            })
            .collect();
        let argmax = |normalised: bool| -> Vec<usize> {
            let degs: Vec<Ratio<u128>> = cands
                .iter()
                .map(|h| oracle_degree(&src, h, normalised))
                .collect();
            let best = degs.iter().max().unwrap();
            (0..degs.len()).filter(|&i| degs[i] == *best).collect()
        };
        let impl_argmax = |dist: Distance| -> Vec<usize> {
            let degs: Vec<Degree> = cands
                .iter()
                .map(|h| association_degree(&src, h, dist))
                .collect();
            let best = *degs.iter().max().unwrap();
            (0..degs.len()).filter(|&i| degs[i] == best).collect()
        };
        let f1 = impl_argmax(Distance::Manhattan);
        if f1 != impl_argmax(Distance::Normalized) || f1 != argmax(false) || f1 != argmax(true) {
            argmax_bad += 1;
        }
    }
    report(
        "degree formula checks",
        bad == 0 && argmax_bad == 0 && guards > 0 && sentinels > 0,
        format!(
            "{checked} random + {} fixed cases, {bad} mismatches ({guards} guarded, {sentinels} sentinel); 2000 argmax sets, {argmax_bad} disagreements",
            fixed.len() + 1
        ),
    );
}

// ---------------------------------------------------------------------------

/// Enough fast memory for the planted pairs: the record table outlasts one
/// round of the trace and the compute table fills within a round.
fn discovery_config(distance: Distance) -> SimConfig {
    SimConfig {
        cache_pct: 0.02,
        pref_rel_size: 0.1,
        table_split: [0.45, 0.05, 0.5],
        dbsp: DbspParams {
            lookahead: 4,
            container_size: 3,
            l_min: 2,
            l_max: 4,
            distance,
        },
        ..SimConfig::default()
    }
}

#[test]
fn synthetic_pattern_discovery() {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for distance in [Distance::Manhattan, Distance::Normalized] {
        let cfg = discovery_config(distance);
        let noisy = synth_correlated_trace(SynthSpec {
            n_pairs: 20,
            repeats: 5,
            gap: 1,
            noise_keys: 200,
            seed: 42,
        })
        .unwrap();
        let r = get_target_metrics(Family::Dbsp, &noisy, &cfg).unwrap();
        let base = replay(&noisy, r.budget.baseline_blocks, &mut NullPrefetcher).unwrap();
        let base_chr = metrics::chr(base.n_ch, base.n_cm).unwrap();
        ok &= r.chr > base_chr && r.precision >= 0.9;
        lines.push(format!(
            "{distance} noise 200: chr {:.4} > baseline {:.4}, precision {:.4}",
            r.chr, base_chr, r.precision
        ));

        let clean = synth_correlated_trace(SynthSpec {
            n_pairs: 20,
            repeats: 5,
            gap: 1,
            noise_keys: 0,
            seed: 42,
        })
        .unwrap();
        let r = get_target_metrics(Family::Dbsp, &clean, &cfg).unwrap();
        ok &= r.precision == 1.0 && r.counters.n_pr > 0;
        lines.push(format!(
            "{distance} noise 0: precision {} over {} prefetches",
            r.precision, r.counters.n_pr
        ));
    }
    let (fast, timing) = within(Duration::from_secs(5), started);
    report(
        "synthetic-pattern discovery",
        ok && fast,
        format!("{}; {timing}", lines.join("; ")),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn metric_identities() {
    let mut lines = Vec::new();
    let mut ok = true;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random = Trace::from_reads(
        "random",
        (0..5000).map(|_| (rng.gen_range(0..3000u64), rng.gen_range(1..=4u64))),
    )
    .unwrap();
    let synth = synth_correlated_trace(SynthSpec {
        n_pairs: 10,
        repeats: 4,
        gap: 2,
        noise_keys: 100,
        seed: 3,
    })
    .unwrap();
    for trace in [&random, &synth] {
        let cfg = SimConfig {
            cache_pct: 0.05,
            pref_rel_size: 0.0,
            ..SimConfig::default()
        };
        let r = get_target_metrics(Family::Lru, trace, &cfg).unwrap();
        ok &= r.sar == 1.0;
        lines.push(format!("null prefetcher SAR on {} = {}", trace.name, r.sar));

        let cfg = SimConfig {
            cache_pct: 0.05,
            ..SimConfig::default()
        };
        let r = get_target_metrics(Family::Dbsp, trace, &cfg).unwrap();
        let conserved = r.counters.n_ch + r.counters.n_cm == trace.len() as u64;
        ok &= conserved && r.counters.n_eu <= r.counters.n_pr;
        lines.push(format!(
            "n_ch + n_cm = {} for {} reads",
            r.counters.n_ch + r.counters.n_cm,
            trace.len()
        ));
    }
    let endpoints = [1u64, 2, 3, 10, 1_000, u32::MAX as u64]
        .iter()
        .all(|&n| metrics::precision(n, 0) == 1.0 && metrics::precision(n, n) == 0.0);
    ok &= endpoints;
    lines.push(format!(
        "precision(n,0)=1 and precision(n,n)=0: {endpoints}"
    ));
    report("metric identities", ok, lines.join("; "));
}

// ---------------------------------------------------------------------------

#[test]
fn sweep_is_deterministic() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let flags = |out: &std::path::Path, jobs: usize| RawFlags {
        synthetic: Some("8,4,1,60".into()),
        cache_pct: Some(0.03),
        s_c: vec![1, 3],
        seed: Some(11),
        jobs: Some(jobs),
        out: Some(out.to_path_buf()),
        ..RawFlags::default()
    };
    let mut outputs = Vec::new();
    for (dir, jobs) in dirs.iter().zip([4, 4, 1]) {
        let (spec, _) = validate_config(flags(dir.path(), jobs)).unwrap();
        run_sweep(&spec).unwrap();
        outputs.push(fs::read(dir.path().join("results.csv")).unwrap());
    }
    let identical = outputs[0] == outputs[1];
    let thread_independent = outputs[0] == outputs[2];
    report(
        "determinism",
        identical && thread_independent && !outputs[0].is_empty(),
        format!(
            "results.csv {} bytes; repeat identical: {identical}; 4 vs 1 threads identical: {thread_independent}",
            outputs[0].len()
        ),
    );
}

// ---------------------------------------------------------------------------

/// Set `DBSP_MSR_TRACE` to an MSR-Cambridge volume CSV to run this check.
#[test]
fn msr_volume_smoke() {
    let Some(path) = std::env::var_os("DBSP_MSR_TRACE") else {
        println!("[SKIP] MSR volume smoke check: DBSP_MSR_TRACE not set");
        return;
    };
    let trace = load_trace(&path, 4096).unwrap();
    let cfg = SimConfig {
        cache_pct: 0.01,
        pref_rel_size: 0.1,
        dbsp: DbspParams {
            container_size: 3,
            l_min: 2,
            distance: Distance::Manhattan,
            ..DbspParams::default()
        },
        ..SimConfig::default()
    };
    let dbsp = get_target_metrics(Family::Dbsp, &trace, &cfg).unwrap();
    let lru = get_target_metrics(Family::Lru, &trace, &cfg).unwrap();
    report(
        "MSR volume smoke check",
        dbsp.chr >= lru.chr,
        format!(
            "{}: DBSP chr {:.4} vs LRU at reduced capacity {:.4} (precision {:.4}, sar {:.4})",
            trace.name, dbsp.chr, lru.chr, dbsp.precision, dbsp.sar
        ),
    );
}
