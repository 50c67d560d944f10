//! I/O trace ingestion.
//!
//! MSR-Cambridge traces are headerless CSV with seven columns:
//! `Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime`, offsets and
//! sizes in bytes. Only reads are kept. Each read becomes a [`ReadRequest`]
//! keyed by its first block and stamped with its index in the read sequence.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub timestamp_raw: u64,
    pub host: String,
    pub disk: u32,
    pub op: Op,
    pub offset_bytes: u64,
    pub size_bytes: u64,
    pub response_time_raw: u64,
}

impl TraceRecord {
    /// Converts the byte span to a block-granular request stamped `ts`.
    pub fn to_request(&self, block_size: u64, ts: u64) -> ReadRequest {
        let first = self.offset_bytes / block_size;
        let end = self.offset_bytes + self.size_bytes;
        let last = end.div_ceil(block_size);
        ReadRequest {
            key: first,
            size_blocks: last - first,
            ts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReadRequest {
    /// First block of the request.
    pub key: u64,
    pub size_blocks: u64,
    /// Index of the read within its trace.
    pub ts: u64,
}

impl ReadRequest {
    pub fn blocks(&self) -> std::ops::Range<u64> {
        self.key..self.key + self.size_blocks
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub name: String,
    pub reads: Vec<ReadRequest>,
    pub storage_blocks: u64,
}

impl Trace {
    /// Builds a trace from reads already in order, restamping them 0, 1, 2, ...
    pub fn from_reads(
        name: impl Into<String>,
        reads: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self> {
        let name = name.into();
        let reads: Vec<ReadRequest> = reads
            .into_iter()
            .enumerate()
            .map(|(ts, (key, size_blocks))| ReadRequest {
                key,
                size_blocks,
                ts: ts as u64,
            })
            .collect();
        if let Some(bad) = reads.iter().find(|r| r.size_blocks == 0) {
            return Err(Error::Config(format!(
                "read at ts {} has zero size",
                bad.ts
            )));
        }
        let storage_blocks = storage_size(&reads).map_err(|_| Error::NoReads(name.clone()))?;
        Ok(Self {
            name,
            reads,
            storage_blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }
}

/// Parses one MSR-Cambridge CSV line. `line_no` is 1-based and only used in
/// error messages.
pub fn parse_msr_line(line: &str, line_no: usize) -> Result<TraceRecord> {
    let err = |reason: String| Error::Parse {
        line: line_no,
        reason,
    };
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(err(format!("expected 7 fields, found {}", fields.len())));
    }
    let int = |idx: usize, name: &str| -> Result<u64> {
        fields[idx].trim().parse::<u64>().map_err(|_| {
            err(format!(
                "{name} `{}` is not a non-negative integer",
                fields[idx]
            ))
        })
    };
    let op = match fields[3].trim() {
        t if t.eq_ignore_ascii_case("read") => Op::Read,
        t if t.eq_ignore_ascii_case("write") => Op::Write,
        t => return Err(err(format!("unknown request type `{t}`"))),
    };
    let timestamp_raw = int(0, "timestamp")?;
    let disk = u32::try_from(int(2, "disk number")?)
        .map_err(|_| err("disk number out of range".into()))?;
    let offset_bytes = int(4, "offset")?;
    let size_bytes = int(5, "size")?;
    let response_time_raw = int(6, "response time")?;
    if size_bytes == 0 {
        return Err(err("size must be at least one byte".into()));
    }
    if offset_bytes.checked_add(size_bytes).is_none() {
        return Err(err("offset + size overflows".into()));
    }
    Ok(TraceRecord {
        timestamp_raw,
        host: fields[1].trim().to_owned(),
        disk,
        op,
        offset_bytes,
        size_bytes,
        response_time_raw,
    })
}

/// Reads an MSR trace from any buffered reader, keeping reads only.
pub fn read_trace(name: &str, input: impl BufRead, block_size: u64) -> Result<Trace> {
    check_block_size(block_size)?;
    let mut reads = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_msr_line(&line, idx + 1)?;
        if record.op == Op::Read {
            let ts = reads.len() as u64;
            reads.push(record.to_request(block_size, ts));
        }
    }
    let storage_blocks = storage_size(&reads).map_err(|_| Error::NoReads(name.to_owned()))?;
    Ok(Trace {
        name: name.to_owned(),
        reads,
        storage_blocks,
    })
}

/// Loads an MSR trace file. The trace is named after the file stem.
pub fn load_trace(path: impl AsRef<Path>, block_size: u64) -> Result<Trace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    read_trace(&name, BufReader::new(file), block_size).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes reads back out in MSR format, one `Read` line per request.
pub fn write_msr(trace: &Trace, block_size: u64, mut out: impl Write) -> std::io::Result<()> {
    for r in &trace.reads {
        writeln!(
            out,
            "{},{},0,Read,{},{},0",
            r.ts,
            trace.name,
            r.key * block_size,
            r.size_blocks * block_size
        )?;
    }
    Ok(())
}

/// Largest `key + size_blocks` over all reads: the highest block address the
/// trace touches.
pub fn storage_size(reads: &[ReadRequest]) -> Result<u64> {
    reads
        .iter()
        .map(|r| r.key + r.size_blocks)
        .max()
        .ok_or(Error::Config("storage size of an empty read set".into()))
}

fn check_block_size(block_size: u64) -> Result<()> {
    if block_size.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "block size {block_size} is not a power of two"
        )))
    }
}

/// Parameters of [`synth_correlated_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_pairs: usize,
    pub repeats: usize,
    pub gap: usize,
    pub noise_keys: usize,
    pub seed: u64,
}

/// Generates a trace with planted sporadic correlations.
///
/// Each round visits every pair in a fixed order: `A_i`, then `gap - 1`
/// filler reads, then `B_i`. This repeats `repeats` times. `noise_keys`
/// single reads are scattered uniformly between episodes, never inside one,
/// so `B_i` always lands exactly `gap` reads after `A_i`. Pair keys are
/// read only inside their episodes. Every filler and noise read gets a
/// fresh key. All keys are single blocks drawn without replacement from an
/// address space 16 times the number of distinct keys.
pub fn synth_correlated_trace(spec: SynthSpec) -> Result<Trace> {
    let SynthSpec {
        n_pairs,
        repeats,
        gap,
        noise_keys,
        seed,
    } = spec;
    if n_pairs < 1 || repeats < 2 || gap < 1 {
        return Err(Error::Config(format!(
            "synthetic trace needs n_pairs >= 1, repeats >= 2, gap >= 1 (got {n_pairs}, {repeats}, {gap})"
        )));
    }
    let episodes = n_pairs * repeats;
    let fillers = episodes * (gap - 1);
    let distinct = 2 * n_pairs + fillers + noise_keys;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = distinct * 16;
    let mut keys = sample(&mut rng, space, distinct)
        .into_iter()
        .map(|k| k as u64);
    let pairs: Vec<(u64, u64)> = (0..n_pairs)
        .map(|_| (keys.next().unwrap(), keys.next().unwrap()))
        .collect();

    // noise_before[e] = noise reads emitted before episode e; the last slot
    // trails the final episode.
    let mut noise_before = vec![0usize; episodes + 1];
    for _ in 0..noise_keys {
        noise_before[rng.gen_range(0..=episodes)] += 1;
    }

    let mut seq = Vec::with_capacity(episodes * (gap + 1) + noise_keys);
    for (e, &noise) in noise_before.iter().enumerate() {
        seq.extend(keys.by_ref().take(noise));
        if e == episodes {
            break;
        }
        let (a, b) = pairs[e % n_pairs];
        seq.push(a);
        seq.extend(keys.by_ref().take(gap - 1));
        seq.push(b);
    }
    debug_assert!(keys.next().is_none());

    Trace::from_reads(
        format!("synthetic-p{n_pairs}-r{repeats}-g{gap}-n{noise_keys}-s{seed}"),
        seq.into_iter().map(|k| (k, 1)),
    )
}
