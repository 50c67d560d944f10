use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dbsp_core::sweep::{self, RawFlags, PARETO_COLUMNS, RESULTS_COLUMNS};

/// Sweep DBSP prefetcher configurations over I/O traces.
#[derive(Debug, Parser)]
#[command(name = "dbsp-sim", version, after_help = output_help())]
struct Cli {
    /// MSR-Cambridge trace files (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    traces: Vec<PathBuf>,

    /// Directory whose files are all loaded as traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,

    /// Block size in bytes (power of two). [default: 4096]
    #[arg(long)]
    block_size: Option<u64>,

    /// Fast memory as a fraction of storage size. [default: 0.01]
    #[arg(long)]
    cache_pct: Option<f64>,

    /// Prefetcher share(s) of fast memory. [default: 0.1]
    #[arg(long, value_delimiter = ',')]
    pref_rel_size: Vec<f64>,

    /// Association container sizes. [default: 1,2,3,5,7,9]
    #[arg(long = "sc", value_delimiter = ',')]
    s_c: Vec<usize>,

    /// Stamps needed before a request is mined (>= 2). [default: 2]
    #[arg(long = "lmin")]
    l_min: Option<usize>,

    /// Stamps after which a compute-table row is dropped. [default: 2 * lmin]
    #[arg(long = "lmax")]
    l_max: Option<usize>,

    /// Rows each compute-table row is compared against. [default: 4]
    #[arg(long)]
    lookahead: Option<usize>,

    /// Distance function: f1, f2 or both. [default: both]
    #[arg(long)]
    distance: Option<String>,

    /// Seed for synthetic traces. [default: 0]
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory. [default: results]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads. [default: all cores]
    #[arg(long)]
    jobs: Option<usize>,

    /// Add a synthetic trace: pairs,repeats,gap,noise
    #[arg(long)]
    synthetic: Option<String>,
}

fn output_help() -> String {
    format!(
        "Output files (in --out):\n  results.csv            {}\n  pareto_precision.csv   {}\n  pareto_sar.csv         (same columns, avg_metric = SAR)\n  scurve_chr.csv         trace,<config ids...> (sorted by the first config column)\n  scurve_precision.csv   same layout\n  summary.json           averages and Pareto fronts",
        RESULTS_COLUMNS.join(","),
        PARETO_COLUMNS.join(",")
    )
}

impl From<Cli> for RawFlags {
    fn from(c: Cli) -> Self {
        RawFlags {
            traces: c.traces,
            trace_dir: c.trace_dir,
            block_size: c.block_size,
            cache_pct: c.cache_pct,
            pref_rel_sizes: c.pref_rel_size,
            s_c: c.s_c,
            l_min: c.l_min,
            l_max: c.l_max,
            lookahead: c.lookahead,
            distance: c.distance,
            seed: c.seed,
            out: c.out,
            jobs: c.jobs,
            synthetic: c.synthetic,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (spec, warnings) = sweep::validate_config(cli.into())?;
    for w in warnings {
        log::warn!("{w}");
    }
    let outcome = sweep::run_sweep(&spec)?;
    log::info!(
        "evaluated {} configurations on {} traces into {}",
        outcome.results.len(),
        outcome.traces.len(),
        spec.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<dbsp_core::Error>()
                .is_some_and(|e| matches!(e, dbsp_core::Error::Config(_)))
            {
                eprintln!("\nRun with --help for usage.");
            }
            ExitCode::FAILURE
        }
    }
}
