//! CSV and JSON outputs, digests and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use merw_core::harness::{Ensemble, EnsembleSummary};
use merw_core::Snapshot;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Version of the CSV column layout.
pub const CSV_SCHEMA: u32 = 1;
pub const TOOL: &str = "merw";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Seventeen significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn vector_header<'a>(prefix: &'a str, suffix: &str, d: usize) -> impl Iterator<Item = String> + 'a {
    let suffix = suffix.to_string();
    (1..=d).map(move |i| format!("{prefix}_{i}{suffix}"))
}

fn write_csv(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// One row per checkpoint of a single path:
/// `checkpoint, moves, W_1..d, S_1..d, sigma_1..d`.
pub fn write_trace_csv(path: &Path, snapshots: &[Snapshot], d: usize) -> Result<(), OutputError> {
    let header = ["checkpoint".to_string(), "moves".to_string()]
        .into_iter()
        .chain(vector_header("W", "", d))
        .chain(vector_header("S", "", d))
        .chain(vector_header("sigma", "", d))
        .collect();
    let rows = snapshots
        .iter()
        .map(|s| {
            [s.step.to_string(), s.moves.to_string()]
                .into_iter()
                .chain(s.position.iter().map(i64::to_string))
                .chain(s.position_real.iter().map(|&x| fmt_f64(x)))
                .chain(s.axis_visits.iter().map(u64::to_string))
                .collect()
        })
        .collect();
    write_csv(path, header, rows)
}

/// One row per checkpoint of cross-replica means and variances:
/// `checkpoint, moves_mean, moves_var, W_i_mean, W_i_var, S_i_mean,
/// S_i_var, sigma_i_mean, sigma_i_var`.
pub fn write_summary_csv(path: &Path, summary: &EnsembleSummary) -> Result<(), OutputError> {
    let d = summary.config.params.dim();
    let mut header = vec![
        "checkpoint".to_string(),
        "moves_mean".to_string(),
        "moves_var".to_string(),
    ];
    for name in ["W", "S", "sigma"] {
        header.extend(vector_header(name, "_mean", d));
        header.extend(vector_header(name, "_var", d));
    }
    let rows = summary
        .checkpoints
        .iter()
        .map(|c| {
            let mut row = vec![
                c.step.to_string(),
                fmt_f64(c.moves.mean),
                fmt_f64(c.moves.variance),
            ];
            for v in [&c.position, &c.position_real, &c.sigma_diag] {
                row.extend(v.mean.iter().map(|&x| fmt_f64(x)));
                row.extend((0..d).map(|i| fmt_f64(v.variance(i))));
            }
            row
        })
        .collect();
    write_csv(path, header, rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn sha256_file(path: &Path) -> Result<String, OutputError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub csv_schema: u32,
    /// Fully resolved configuration; `merw simulate <manifest>` re-runs it.
    pub config: RunConfig,
    pub master_seed: u64,
    pub parallelism: usize,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputDigest>,
}

/// True for a JSON document written as a [`RunManifest`].
pub fn is_manifest(doc: &serde_json::Value) -> bool {
    doc.get("tool_version").is_some() && doc.get("config").is_some()
}

/// Writes the data files of a finished run and returns their digests in
/// write order. A single replica yields a trace CSV, an ensemble yields a
/// summary CSV and a summary JSON.
pub fn write_run(dir: &Path, ens: &Ensemble) -> Result<Vec<OutputDigest>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let d = ens.config().params.dim();
    let files: Vec<&str> = if ens.records.len() == 1 {
        write_trace_csv(&dir.join(TRACE_FILE), &ens.records[0].snapshots, d)?;
        vec![TRACE_FILE]
    } else {
        write_summary_csv(&dir.join(SUMMARY_CSV), &ens.summary)?;
        write_json(&dir.join(SUMMARY_JSON), &ens.summary)?;
        vec![SUMMARY_CSV, SUMMARY_JSON]
    };
    files
        .into_iter()
        .map(|f| {
            Ok(OutputDigest {
                file: f.to_string(),
                sha256: sha256_file(&dir.join(f))?,
            })
        })
        .collect()
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
