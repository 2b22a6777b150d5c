//! Campaign orchestration behind the `mprobe` subcommands: configuration,
//! resumable record generation, and the summary tables computed from
//! record files.
//!
//! Each `cmd_*` function is the library form of one subcommand and writes
//! its outputs under the configured output directory.

mod analysis;
mod config;
mod diagnose;
mod heatmap;
mod paths;
mod trajectory;

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{
    cmd_correlate, cmd_hf_transfer, cmd_ood, correlate_records, hf_transfer_summary, ood_report,
    CorrelationRow, HfTransferRow, OodReport,
};
pub use config::{
    ConditionConfig, ConditionSource, ProbeConfig, RunConfig, SeedSpec, StatsConfig, TrajectoryConfig,
};
pub use diagnose::{cmd_diagnose, CampaignManifest, CellStatus, DiagnoseReport};
pub use heatmap::{cmd_heatmap, HeatmapOutputs};
pub use paths::*;
pub use trajectory::{cmd_trajectory, TrajectoryReport};

use crate::geometry::GeometricRecord;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("generator error: {0}")]
    Generator(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CampaignError {
    /// Process exit status: 1 config, 2 generator or transport, 3 data or
    /// pairing. I/O failures count as data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Generator(_) => 2,
            Self::Data(_) | Self::Io { .. } => 3,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.to_path_buf(), source }
}

/// A cell that failed; written in place of its record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorLine {
    pub seed: u64,
    pub condition: String,
    pub error: String,
}

/// One line of a records file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordLine {
    Record(GeometricRecord),
    Error(ErrorLine),
}

impl RecordLine {
    pub fn cell(&self) -> (u64, &str) {
        match self {
            Self::Record(r) => (r.seed, &r.condition),
            Self::Error(e) => (e.seed, &e.condition),
        }
    }

    /// Parses and validates one JSONL line.
    pub fn parse(line: &str) -> Result<Self, String> {
        let parsed: Self = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if let Self::Record(r) = &parsed {
            r.validate()?;
        }
        Ok(parsed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// Parsed contents of a records file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordSet {
    pub records: Vec<GeometricRecord>,
    pub errors: Vec<ErrorLine>,
}

impl RecordSet {
    /// Condition labels in order of first appearance.
    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.condition) {
                out.push(r.condition.clone());
            }
        }
        out
    }

    pub fn by_condition<'a>(&'a self, condition: &'a str) -> impl Iterator<Item = &'a GeometricRecord> + 'a {
        self.records.iter().filter(move |r| r.condition == condition)
    }
}

/// Reads a records file, validating every record. Any malformed or
/// invariant-violating line is a data error naming the line.
pub fn read_records(path: &Path) -> Result<RecordSet, CampaignError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut set = RecordSet::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match RecordLine::parse(&line) {
            Ok(RecordLine::Record(r)) => set.records.push(r),
            Ok(RecordLine::Error(e)) => set.errors.push(e),
            Err(e) => return Err(CampaignError::Data(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(set)
}

/// Writes `bytes` to `path` through a temporary file and a rename, so
/// readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CampaignError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CampaignError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// `f64` formatting for CSV cells; empty for missing values.
pub(crate) fn csv_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.8e}"))
}
