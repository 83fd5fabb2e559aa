//! Record emission. Per-trial rows go out flattened — configuration fields
//! and trial fields side by side — so the CSV and JSON encodings mirror each
//! other column for column. Floats are written in shortest round-trip form
//! and parsed exactly, so a written file reproduces the records bit for bit.

use crate::config::{InstanceMode, ProblemKind, ResolvedConfig};
use crate::runner::ExperimentOutput;
use persim_core::learners::FrameworkKind;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}: expected csv or json")),
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// One per-trial row with its resolved configuration flattened in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRecord {
    pub config_fingerprint: String,
    pub problem: ProblemKind,
    pub framework: FrameworkKind,
    pub d: usize,
    pub t: usize,
    pub n: usize,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// `fixed_p` or `uniform_hard`.
    pub instance_kind: String,
    /// The fixed coordinate mean, or the uniform half-width lambda.
    pub instance_value: f64,
    pub seed: u64,
    pub trial: u64,
    pub loss: f64,
}

impl FlatRecord {
    /// Column names, in struct order. `fields_match_serialization` keeps
    /// this list in sync with the serde encoding.
    pub const FIELDS: [&'static str; 14] = [
        "config_fingerprint",
        "problem",
        "framework",
        "d",
        "t",
        "n",
        "rho",
        "epsilon",
        "delta",
        "instance_kind",
        "instance_value",
        "seed",
        "trial",
        "loss",
    ];
}

/// Flattens an experiment's records against its configuration.
pub fn flatten(output: &ExperimentOutput) -> Vec<FlatRecord> {
    let cfg = &output.config;
    let fingerprint = cfg.fingerprint();
    let (instance_kind, instance_value) = instance_columns(cfg);
    output
        .records
        .iter()
        .map(|r| FlatRecord {
            config_fingerprint: fingerprint.clone(),
            problem: cfg.problem,
            framework: cfg.framework,
            d: cfg.d,
            t: cfg.t,
            n: cfg.n,
            rho: cfg.budget.map(|b| b.rho),
            epsilon: cfg.budget.map(|b| b.epsilon),
            delta: cfg.budget.map(|b| b.delta),
            instance_kind: instance_kind.to_owned(),
            instance_value,
            seed: cfg.seed,
            trial: r.trial,
            loss: r.loss,
        })
        .collect()
}

fn instance_columns(cfg: &ResolvedConfig) -> (&'static str, f64) {
    match cfg.instance {
        InstanceMode::FixedP { value } => ("fixed_p", value),
        InstanceMode::UniformHard { lambda } => ("uniform_hard", lambda),
    }
}

/// Streams records as CSV. The header row is always present, even with no
/// records, so empty outputs stay machine-readable.
pub fn write_csv<W: Write>(writer: W, records: &[FlatRecord]) -> Result<(), EmitError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(FlatRecord::FIELDS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads back a CSV written by [`write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<FlatRecord>, EmitError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Writes records as a pretty-printed JSON array.
pub fn write_json<W: Write>(writer: W, records: &[FlatRecord]) -> Result<(), EmitError> {
    serde_json::to_writer_pretty(writer, records)?;
    Ok(())
}

/// Reads back a JSON array written by [`write_json`].
pub fn read_json<R: Read>(reader: R) -> Result<Vec<FlatRecord>, EmitError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes records to a file in the requested format.
pub fn write_records_to_path(
    path: &Path,
    format: OutputFormat,
    records: &[FlatRecord],
) -> Result<(), EmitError> {
    let file = create(path)?;
    let buf = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(buf, records),
        OutputFormat::Json => write_json(buf, records),
    }
}

/// Writes any serializable report to a file as pretty-printed JSON.
pub fn write_json_report<T: Serialize>(path: &Path, value: &T) -> Result<(), EmitError> {
    let file = create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File, EmitError> {
    std::fs::File::create(path).map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })
}
