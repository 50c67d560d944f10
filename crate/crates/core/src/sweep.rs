//! Parameter sweeps over traces and DBSP configurations.
//!
//! A sweep evaluates one plain-LRU baseline plus every combination of
//! distance, container size and prefetcher share on every trace, then
//! writes:
//!
//! | file                  | contents                                         |
//! |-----------------------|--------------------------------------------------|
//! | `results.csv`         | one row per (configuration, trace)               |
//! | `summary.json`        | per-configuration averages and Pareto fronts     |
//! | `pareto_precision.csv`| averaged (CHR, precision) per configuration      |
//! | `pareto_sar.csv`      | averaged (CHR, SAR) per configuration            |
//! | `scurve_chr.csv`      | per-trace CHR, one column per configuration      |
//! | `scurve_precision.csv`| per-trace precision, one column per configuration|

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbsp::Distance;
use crate::harness::{
    get_target_metrics, pareto_front_indices, s_curve, DbspParams, Direction, EvalResult, Family,
    Policy, SCurve, SCurveMetric, SimConfig,
};
use crate::trace::{load_trace, synth_correlated_trace, SynthSpec, Trace, DEFAULT_BLOCK_SIZE};
use crate::{metrics, Error, Result};

pub const RESULTS_COLUMNS: [&str; 18] = [
    "trace",
    "config_id",
    "family",
    "s_c",
    "l_a",
    "l_min",
    "l_max",
    "distance",
    "pref_rel_size",
    "chr",
    "precision",
    "sar",
    "n_ch",
    "n_cm",
    "n_pr",
    "n_eu",
    "n_dp_blocks",
    "n_dc_blocks",
];

pub const PARETO_COLUMNS: [&str; 9] = [
    "config_id",
    "family",
    "distance",
    "s_c",
    "pref_rel_size",
    "avg_chr",
    "avg_metric",
    "family_front",
    "global_front",
];

pub const DEFAULT_SC_VALUES: [usize; 6] = [1, 2, 3, 5, 7, 9];

/// Prefetcher shares above this are accepted with a warning.
pub const PREF_REL_SIZE_ADVISORY: f64 = 0.10;

/// Unvalidated sweep settings, as given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawFlags {
    pub traces: Vec<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    pub block_size: Option<u64>,
    pub cache_pct: Option<f64>,
    pub pref_rel_sizes: Vec<f64>,
    pub s_c: Vec<usize>,
    pub l_min: Option<usize>,
    pub l_max: Option<usize>,
    pub lookahead: Option<usize>,
    pub distance: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// `pairs,repeats,gap,noise`
    pub synthetic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthShape {
    pub n_pairs: usize,
    pub repeats: usize,
    pub gap: usize,
    pub noise_keys: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub trace_paths: Vec<PathBuf>,
    pub synthetic: Option<SynthShape>,
    pub block_size: u64,
    pub s_c_values: Vec<usize>,
    pub l_min: usize,
    pub l_max: usize,
    pub lookahead: usize,
    pub distances: Vec<Distance>,
    pub pref_rel_sizes: Vec<f64>,
    pub cache_pct: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

/// Applies defaults and rejects contradictory settings. Also returns
/// warnings about settings that are legal but unusual.
pub fn validate_config(raw: RawFlags) -> Result<(SweepSpec, Vec<String>)> {
    let fail = |msg: String| Err(Error::Config(msg));
    let mut warnings = Vec::new();

    let mut trace_paths = raw.traces;
    if let Some(dir) = &raw.trace_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        found.sort();
        if found.is_empty() {
            warnings.push(format!("trace directory {} is empty", dir.display()));
        }
        trace_paths.extend(found);
    }

    let synthetic = raw
        .synthetic
        .as_deref()
        .map(parse_synth_shape)
        .transpose()?;
    if trace_paths.is_empty() && synthetic.is_none() {
        return fail("no traces given (use --traces, --trace-dir or --synthetic)".into());
    }

    let block_size = raw.block_size.unwrap_or(DEFAULT_BLOCK_SIZE);
    let l_min = raw.l_min.unwrap_or(2);
    if l_min < 2 {
        return fail(format!(
            "--lmin {l_min}: associations need at least two repetitions of a request (l_min >= 2)"
        ));
    }
    let l_max = raw.l_max.unwrap_or(l_min.max(2) * 2);
    let lookahead = raw.lookahead.unwrap_or(4);
    let s_c_values = if raw.s_c.is_empty() {
        DEFAULT_SC_VALUES.to_vec()
    } else {
        raw.s_c
    };
    if s_c_values.contains(&0) {
        return fail("--sc values must be positive".into());
    }
    let distances = match raw.distance.as_deref().unwrap_or("both") {
        "f1" => vec![Distance::Manhattan],
        "f2" => vec![Distance::Normalized],
        "both" => vec![Distance::Manhattan, Distance::Normalized],
        other => return fail(format!("--distance `{other}`: expected f1, f2 or both")),
    };
    let pref_rel_sizes = if raw.pref_rel_sizes.is_empty() {
        vec![PREF_REL_SIZE_ADVISORY]
    } else {
        raw.pref_rel_sizes
    };
    for &p in &pref_rel_sizes {
        if !(0.0..1.0).contains(&p) {
            return fail(format!("--pref-rel-size {p} must be in [0, 1)"));
        }
        if p > PREF_REL_SIZE_ADVISORY {
            warnings.push(format!(
                "--pref-rel-size {p} gives the prefetcher more than {PREF_REL_SIZE_ADVISORY} of fast memory"
            ));
        }
    }
    if raw.jobs == Some(0) {
        return fail("--jobs must be positive".into());
    }

    let spec = SweepSpec {
        trace_paths,
        synthetic,
        block_size,
        s_c_values,
        l_min,
        l_max,
        lookahead,
        distances,
        pref_rel_sizes,
        cache_pct: raw.cache_pct.unwrap_or(0.01),
        seed: raw.seed.unwrap_or(0),
        output_dir: raw.out.unwrap_or_else(|| PathBuf::from("results")),
        jobs: raw.jobs,
    };
    // everything SimConfig checks, once per configuration shape
    for point in spec.configurations() {
        point.sim.validate()?;
    }
    Ok((spec, warnings))
}

fn parse_synth_shape(s: &str) -> Result<SynthShape> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            Error::Config(format!(
                "--synthetic `{s}`: expected pairs,repeats,gap,noise"
            ))
        })?;
    match parts[..] {
        [n_pairs, repeats, gap, noise_keys] => Ok(SynthShape {
            n_pairs,
            repeats,
            gap,
            noise_keys,
        }),
        _ => Err(Error::Config(format!(
            "--synthetic `{s}`: expected pairs,repeats,gap,noise"
        ))),
    }
}

/// One column of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    pub config_id: String,
    pub family: Family,
    pub sim: SimConfig,
}

impl ConfigPoint {
    pub fn family_label(&self) -> String {
        self.family.label(self.sim.dbsp.distance)
    }

    fn is_baseline(&self) -> bool {
        self.family == Family::Lru
    }
}

impl SweepSpec {
    fn sim(&self, distance: Distance, s_c: usize, pref_rel_size: f64) -> SimConfig {
        SimConfig {
            cache_pct: self.cache_pct,
            pref_rel_size,
            block_size: self.block_size,
            dbsp: DbspParams {
                lookahead: self.lookahead,
                container_size: s_c,
                l_min: self.l_min,
                l_max: self.l_max,
                distance,
            },
            policy: Policy::Always,
            ..SimConfig::default()
        }
    }

    /// The LRU baseline followed by every DBSP configuration, distances
    /// outermost and prefetcher shares innermost.
    pub fn configurations(&self) -> Vec<ConfigPoint> {
        let mut points = vec![ConfigPoint {
            config_id: "lru".into(),
            family: Family::Lru,
            sim: self.sim(Distance::Manhattan, 1, 0.0),
        }];
        for &distance in &self.distances {
            for &s_c in &self.s_c_values {
                for &p in &self.pref_rel_sizes {
                    points.push(ConfigPoint {
                        config_id: format!(
                            "dbsp_{}_sc{s_c}_la{}_lmin{}_lmax{}_p{}",
                            distance.label(),
                            self.lookahead,
                            self.l_min,
                            self.l_max,
                            fmt_num(p)
                        ),
                        family: Family::Dbsp,
                        sim: self.sim(distance, s_c, p),
                    });
                }
            }
        }
        points
    }

    pub fn load_traces(&self) -> Result<Vec<Trace>> {
        let mut traces = self
            .trace_paths
            .iter()
            .map(|p| {
                load_trace(p, self.block_size).map_err(|e| e.in_trace(&p.display().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(s) = self.synthetic {
            traces.push(synth_correlated_trace(SynthSpec {
                n_pairs: s.n_pairs,
                repeats: s.repeats,
                gap: s.gap,
                noise_keys: s.noise_keys,
                seed: self.seed,
            })?);
        }
        Ok(traces)
    }
}

/// Evaluation of one configuration over every trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResult {
    pub point: ConfigPoint,
    pub eval: EvalResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub traces: Vec<String>,
    pub results: Vec<ConfigResult>,
}

/// Evaluates every (configuration, trace) pair. Jobs run in parallel but
/// results keep configuration order, then trace order.
pub fn evaluate_grid(spec: &SweepSpec, traces: &[Trace]) -> Result<SweepOutcome> {
    let points = spec.configurations();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|c| (0..traces.len()).map(move |t| (c, t)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(c, t)| {
                let trace = &traces[t];
                get_target_metrics(points[c].family, trace, &points[c].sim)
                    .map_err(|e| e.in_trace(&trace.name))
            })
            .collect::<Result<Vec<_>>>()
    };
    let flat = match spec.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut flat = flat.into_iter();
    let results = points
        .into_iter()
        .map(|point| {
            let per_trace: Vec<_> = flat.by_ref().take(traces.len()).collect();
            Ok(ConfigResult {
                point,
                eval: EvalResult::from_results(per_trace)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome {
        traces: traces.iter().map(|t| t.name.clone()).collect(),
        results,
    })
}

/// Loads the traces, evaluates the grid and writes every result file.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    let traces = spec.load_traces()?;
    let outcome = evaluate_grid(spec, &traces)?;
    write_outputs(spec, &outcome)?;
    Ok(outcome)
}

/// Formats a number with six significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

#[derive(Debug, Serialize)]
struct ConfigSummary<'a> {
    config_id: &'a str,
    family: String,
    distance: Option<Distance>,
    s_c: Option<usize>,
    l_a: Option<usize>,
    l_min: Option<usize>,
    l_max: Option<usize>,
    pref_rel_size: f64,
    avg_chr: f64,
    avg_precision: f64,
    avg_sar: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    block_size: u64,
    cache_pct: f64,
    traces: &'a [String],
    configs: Vec<ConfigSummary<'a>>,
    pareto_precision: Vec<&'a str>,
    pareto_sar: Vec<&'a str>,
}

pub fn write_outputs(spec: &SweepSpec, outcome: &SweepOutcome) -> Result<()> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_results_csv(&dir.join("results.csv"), outcome)?;

    let chr_prec: Vec<(f64, f64)> = outcome
        .results
        .iter()
        .map(|r| (r.eval.avg_chr, r.eval.avg_precision))
        .collect();
    let chr_sar: Vec<(f64, f64)> = outcome
        .results
        .iter()
        .map(|r| (r.eval.avg_chr, r.eval.avg_sar))
        .collect();
    let front_prec = write_pareto_csv(
        &dir.join("pareto_precision.csv"),
        outcome,
        &chr_prec,
        Direction::Maximize,
    )?;
    let front_sar = write_pareto_csv(
        &dir.join("pareto_sar.csv"),
        outcome,
        &chr_sar,
        Direction::Minimize,
    )?;

    for (metric, file) in [
        (SCurveMetric::Chr, "scurve_chr.csv"),
        (SCurveMetric::Precision, "scurve_precision.csv"),
    ] {
        write_scurve_csv(&dir.join(file), &scurve(outcome, metric)?)?;
    }

    let ids = |idx: Vec<usize>| -> Vec<&str> {
        idx.into_iter()
            .map(|i| outcome.results[i].point.config_id.as_str())
            .collect()
    };
    let summary = Summary {
        block_size: spec.block_size,
        cache_pct: spec.cache_pct,
        traces: &outcome.traces,
        configs: outcome
            .results
            .iter()
            .map(|r| {
                let dbsp = (!r.point.is_baseline()).then_some(r.point.sim.dbsp);
                ConfigSummary {
                    config_id: &r.point.config_id,
                    family: r.point.family_label(),
                    distance: dbsp.map(|d| d.distance),
                    s_c: dbsp.map(|d| d.container_size),
                    l_a: dbsp.map(|d| d.lookahead),
                    l_min: dbsp.map(|d| d.l_min),
                    l_max: dbsp.map(|d| d.l_max),
                    pref_rel_size: r.point.sim.pref_rel_size,
                    avg_chr: r.eval.avg_chr,
                    avg_precision: r.eval.avg_precision,
                    avg_sar: r.eval.avg_sar,
                }
            })
            .collect(),
        pareto_precision: ids(front_prec),
        pareto_sar: ids(front_sar),
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn write_results_csv(path: &Path, outcome: &SweepOutcome) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(RESULTS_COLUMNS)?;
    for r in &outcome.results {
        let p = &r.point;
        let d = p.sim.dbsp;
        let dbsp_field = |v: usize| {
            if p.is_baseline() {
                String::new()
            } else {
                v.to_string()
            }
        };
        for t in &r.eval.per_trace {
            let c = &t.counters;
            w.write_record([
                t.trace_name.clone(),
                p.config_id.clone(),
                p.family_label(),
                dbsp_field(d.container_size),
                dbsp_field(d.lookahead.min(t.budget.nr_c)),
                dbsp_field(d.l_min),
                dbsp_field(d.l_max),
                if p.is_baseline() {
                    "none".into()
                } else {
                    d.distance.label().into()
                },
                fmt_num(p.sim.pref_rel_size),
                fmt_num(t.chr),
                fmt_num(t.precision),
                fmt_num(t.sar),
                c.n_ch.to_string(),
                c.n_cm.to_string(),
                c.n_pr.to_string(),
                c.n_eu.to_string(),
                c.n_dp_blocks.to_string(),
                c.n_dc_blocks.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes every configuration's averaged point with its front membership;
/// returns the indices on the global front.
fn write_pareto_csv(
    path: &Path,
    outcome: &SweepOutcome,
    points: &[(f64, f64)],
    y: Direction,
) -> Result<Vec<usize>> {
    let global = pareto_front_indices(points, y);
    let mut family_front = vec![false; points.len()];
    let mut labels: Vec<String> = outcome
        .results
        .iter()
        .map(|r| r.point.family_label())
        .collect();
    labels.dedup();
    for label in labels {
        let members: Vec<usize> = (0..points.len())
            .filter(|&i| outcome.results[i].point.family_label() == label)
            .collect();
        let sub: Vec<(f64, f64)> = members.iter().map(|&i| points[i]).collect();
        for k in pareto_front_indices(&sub, y) {
            family_front[members[k]] = true;
        }
    }
    let mut w = csv_writer(path)?;
    w.write_record(PARETO_COLUMNS)?;
    for (i, r) in outcome.results.iter().enumerate() {
        let p = &r.point;
        w.write_record([
            p.config_id.clone(),
            p.family_label(),
            if p.is_baseline() {
                "none".into()
            } else {
                p.sim.dbsp.distance.label().into()
            },
            if p.is_baseline() {
                String::new()
            } else {
                p.sim.dbsp.container_size.to_string()
            },
            fmt_num(p.sim.pref_rel_size),
            fmt_num(points[i].0),
            fmt_num(points[i].1),
            u8::from(family_front[i]).to_string(),
            u8::from(global.contains(&i)).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(global)
}

/// The s-curve is sorted by the first DBSP configuration (the baseline if
/// there is none), which is also written as the first metric column.
fn scurve(outcome: &SweepOutcome, metric: SCurveMetric) -> Result<SCurve> {
    let reference = outcome
        .results
        .iter()
        .position(|r| !r.point.is_baseline())
        .unwrap_or(0);
    let mut order: Vec<usize> = vec![reference];
    order.extend((0..outcome.results.len()).filter(|&i| i != reference));
    let columns: Vec<(String, Vec<_>)> = order
        .iter()
        .map(|&i| {
            let r = &outcome.results[i];
            (r.point.config_id.clone(), r.eval.per_trace.clone())
        })
        .collect();
    s_curve(&columns, metric, 0)
}

fn write_scurve_csv(path: &Path, curve: &SCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["trace".to_owned()];
    header.extend(curve.columns.iter().cloned());
    w.write_record(&header)?;
    for (trace, values) in &curve.rows {
        let mut row = vec![trace.clone()];
        row.extend(values.iter().map(|v| fmt_num(*v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Recomputes a results.csv row's metrics from its raw counters.
pub fn rederive_row(record: &csv::StringRecord) -> Result<(String, String, String)> {
    let field = |name: &str| -> Result<u64> {
        let idx = RESULTS_COLUMNS
            .iter()
            .position(|c| *c == name)
            .expect("known column");
        record
            .get(idx)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config(format!("column {name} is not an integer")))
    };
    Ok((
        fmt_num(metrics::chr(field("n_ch")?, field("n_cm")?)?),
        fmt_num(metrics::precision(field("n_pr")?, field("n_eu")?)),
        fmt_num(metrics::sar(field("n_dp_blocks")?, field("n_dc_blocks")?)?),
    ))
}
