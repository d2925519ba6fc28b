//! Trace files.
//!
//! A run writes three files under `<dir>/<prefix>.*`:
//!
//! - `.trace.jsonl` — one self-describing JSON record per line; the first
//!   line is a header carrying the config hashes. Deterministic under the
//!   run seed (wall times are kept out of it on purpose).
//! - `.latency.csv` — per-step solver wall times, `step,micros`.
//! - `.summary.csv` — one-row session summary with the config hash.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::session::{SessionSummary, SessionTrace, StepRecord};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    schema_version: u32,
    config_hash: String,
    family_hash: String,
    method: String,
    horizon: u32,
    total_users: u32,
    seed: u64,
}

/// Paths a written trace ended up at.
#[derive(Clone, Debug)]
pub struct TraceFiles {
    pub trace: PathBuf,
    pub latency: Option<PathBuf>,
    pub summary: PathBuf,
}

pub fn write_trace(
    dir: impl AsRef<Path>,
    prefix: &str,
    trace: &SessionTrace,
) -> Result<TraceFiles, AppError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(AppError::data)?;

    let trace_path = dir.join(format!("{prefix}.trace.jsonl"));
    let header = TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        config_hash: trace.config_hash.clone(),
        family_hash: trace.family_hash.clone(),
        method: trace.method.clone(),
        horizon: trace.horizon,
        total_users: trace.total_users,
        seed: trace.seed,
    };
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&header).map_err(AppError::data)?);
    out.push('\n');
    for record in &trace.records {
        out.push_str(&serde_json::to_string(record).map_err(AppError::data)?);
        out.push('\n');
    }
    fs::write(&trace_path, out).map_err(AppError::data)?;

    let latency_path = if trace.latencies_us.is_empty() {
        None
    } else {
        let path = dir.join(format!("{prefix}.latency.csv"));
        let mut file = File::create(&path).map_err(AppError::data)?;
        writeln!(file, "step,micros").map_err(AppError::data)?;
        for (i, us) in trace.latencies_us.iter().enumerate() {
            writeln!(file, "{},{us}", i + 1).map_err(AppError::data)?;
        }
        Some(path)
    };

    let summary_path = dir.join(format!("{prefix}.summary.csv"));
    fs::write(&summary_path, summary_csv(trace)).map_err(AppError::data)?;

    Ok(TraceFiles { trace: trace_path, latency: latency_path, summary: summary_path })
}

fn csv_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(trace: &SessionTrace) -> String {
    let s = &trace.summary;
    let mut out = String::from(
        "method,seed,horizon,total_users,served_steps,infeasible_steps,relaxed_steps,\
         mean_quality,final_fairness,mean_relative_quality,latency_mean_us,latency_p50_us,\
         latency_p95_us,config_hash\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        trace.method,
        trace.seed,
        trace.horizon,
        trace.total_users,
        s.served_steps,
        s.infeasible_steps,
        s.relaxed_steps,
        csv_opt(&s.mean_quality),
        s.final_fairness,
        csv_opt(&s.mean_relative_quality),
        csv_opt(&s.latency_mean_us),
        csv_opt(&s.latency_p50_us),
        csv_opt(&s.latency_p95_us),
        trace.config_hash,
    ));
    out
}

/// Reads a `.trace.jsonl` back into a [`SessionTrace`]. The summary is
/// rebuilt from the records; latency statistics are restored from the
/// sidecar when it sits next to the trace file.
pub fn read_trace(path: impl AsRef<Path>) -> Result<SessionTrace, AppError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| AppError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();

    let header_line = lines
        .next()
        .ok_or_else(|| AppError::Data(format!("{}: empty trace", path.display())))?
        .map_err(AppError::data)?;
    let header: TraceHeader = serde_json::from_str(&header_line)
        .map_err(|e| AppError::Data(format!("{}: bad header: {e}", path.display())))?;
    if header.schema_version != TRACE_SCHEMA_VERSION {
        return Err(AppError::Data(format!(
            "{}: trace schema {} unsupported",
            path.display(),
            header.schema_version
        )));
    }

    let mut records: Vec<StepRecord> = Vec::new();
    for line in lines {
        let line = line.map_err(AppError::data)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| AppError::Data(format!("{}: bad record: {e}", path.display())))?,
        );
    }

    let latencies = read_latency_sidecar(path)?;
    let final_fairness = records.last().map(|r| r.fairness_so_far).unwrap_or(1.0);
    let summary = rebuild_summary(&records, &latencies, final_fairness);

    Ok(SessionTrace {
        config_hash: header.config_hash,
        family_hash: header.family_hash,
        method: header.method,
        horizon: header.horizon,
        total_users: header.total_users,
        seed: header.seed,
        records,
        latencies_us: latencies,
        summary,
    })
}

fn read_latency_sidecar(trace_path: &Path) -> Result<Vec<u64>, AppError> {
    let name = trace_path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".trace.jsonl"))
        .map(|stem| format!("{stem}.latency.csv"));
    let Some(name) = name else { return Ok(Vec::new()) };
    let sidecar = trace_path.with_file_name(name);
    if !sidecar.exists() {
        return Ok(Vec::new());
    }
    let body = fs::read_to_string(&sidecar).map_err(AppError::data)?;
    let mut out = Vec::new();
    for line in body.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let micros = line
            .split(',')
            .nth(1)
            .and_then(|f| f.trim().parse::<u64>().ok())
            .ok_or_else(|| AppError::Data(format!("{}: bad latency row", sidecar.display())))?;
        out.push(micros);
    }
    Ok(out)
}

fn rebuild_summary(records: &[StepRecord], latencies: &[u64], final_fairness: f64) -> SessionSummary {
    let served: Vec<&StepRecord> = records.iter().filter(|r| r.quality.is_some()).collect();
    let mean_quality = if served.is_empty() {
        None
    } else {
        Some(served.iter().filter_map(|r| r.quality).sum::<f64>() / served.len() as f64)
    };
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.relative_quality).collect();
    let (latency_mean_us, latency_p50_us, latency_p95_us) = if latencies.is_empty() {
        (None, None, None)
    } else {
        let mut sorted = latencies.to_vec();
        sorted.sort_unstable();
        (
            Some(sorted.iter().sum::<u64>() as f64 / sorted.len() as f64),
            Some(sorted[(sorted.len() - 1) / 2]),
            Some(sorted[((sorted.len() - 1) * 95) / 100]),
        )
    };
    SessionSummary {
        served_steps: served.len() as u32,
        infeasible_steps: (records.len() - served.len()) as u32,
        relaxed_steps: records.iter().filter(|r| r.relaxed).count() as u32,
        mean_quality,
        final_fairness,
        mean_relative_quality: if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        },
        latency_mean_us,
        latency_p50_us,
        latency_p95_us,
    }
}
