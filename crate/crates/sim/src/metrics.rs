//! Metric tables: per-seed learning curves and across-seed summaries.
//!
//! CSV output starts with `# key=value` metadata lines, followed by a
//! header row and one record per row. JSON output is
//! `{"metadata": {...}, "rows": [...]}`. Floats are written in shortest
//! round-trip form, so identical runs produce identical files apart from
//! the `timestamp` entry.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Method, RunConfig, Scenario};
use crate::harness::{MetricsRow, SummaryRow};

pub const ROWS_HEADER: [&str; 5] = ["method", "seed", "task_index", "mean_packets", "std_packets"];
pub const SUMMARY_HEADER: [&str; 5] = ["method", "task_index", "seeds", "mean", "std"];
pub const TIMESTAMP_KEY: &str = "timestamp";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("nothing to write: the table is empty")]
    Empty,
    #[error("unknown format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(MetricsError::UnknownFormat(s.to_string())),
        }
    }
}

/// Ordered `key=value` pairs describing how a table was produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    /// Version, scenario, config hash, timestamp, `extra`, then every
    /// resolved config key.
    pub fn for_run(cfg: &RunConfig, scenario: Scenario, extra: &[(&str, String)]) -> Metadata {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut m = Metadata::default();
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("scenario", scenario.to_string());
        m.push("config_hash", cfg.hash());
        m.push(TIMESTAMP_KEY, secs.to_string());
        for (k, v) in extra {
            m.push(k, v.clone());
        }
        m.entries.extend(cfg.key_values());
        m
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Copy without the timestamp, for determinism comparisons.
    pub fn without_timestamp(&self) -> Metadata {
        Metadata { entries: self.entries.iter().filter(|(k, _)| k != TIMESTAMP_KEY).cloned().collect() }
    }

    fn write_comments<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}={}", v.replace('\n', " "))?;
        }
        Ok(())
    }

    fn json(&self) -> serde_json::Map<String, serde_json::Value> {
        self.entries.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    method: Method,
    seed: u64,
    task_index: usize,
    mean_packets: f64,
    std_packets: f64,
}

impl From<&MetricsRow> for RowRecord {
    fn from(r: &MetricsRow) -> Self {
        RowRecord {
            method: r.method,
            seed: r.seed,
            task_index: r.task_index,
            mean_packets: r.mean_packets,
            std_packets: r.std_packets,
        }
    }
}

impl From<RowRecord> for MetricsRow {
    fn from(r: RowRecord) -> Self {
        MetricsRow {
            method: r.method,
            seed: r.seed,
            task_index: r.task_index,
            mean_packets: r.mean_packets,
            std_packets: r.std_packets,
        }
    }
}

#[derive(Serialize)]
struct SummaryRecord {
    method: Method,
    task_index: usize,
    seeds: usize,
    mean: f64,
    std: f64,
}

impl From<&SummaryRow> for SummaryRecord {
    fn from(r: &SummaryRow) -> Self {
        SummaryRecord { method: r.method, task_index: r.task_index, seeds: r.seeds, mean: r.mean, std: r.std }
    }
}

#[derive(Serialize)]
struct JsonTable<'a, T> {
    metadata: serde_json::Map<String, serde_json::Value>,
    rows: &'a [T],
}

#[derive(Deserialize)]
struct JsonRows {
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
    rows: Vec<RowRecord>,
}

fn write_table<W: Write, T: Serialize>(
    records: &[T],
    header: [&str; 5],
    meta: &Metadata,
    format: Format,
    mut w: W,
) -> Result<(), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    match format {
        Format::Csv => {
            meta.write_comments(&mut w)?;
            let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(&mut w);
            cw.write_record(header)?;
            for r in records {
                cw.serialize(r)?;
            }
            cw.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &JsonTable { metadata: meta.json(), rows: records })?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], meta: &Metadata, format: Format, w: W) -> Result<(), MetricsError> {
    let records: Vec<RowRecord> = rows.iter().map(RowRecord::from).collect();
    write_table(&records, ROWS_HEADER, meta, format, w)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], meta: &Metadata, format: Format, w: W) -> Result<(), MetricsError> {
    let records: Vec<SummaryRecord> = rows.iter().map(SummaryRecord::from).collect();
    write_table(&records, SUMMARY_HEADER, meta, format, w)
}

/// Writes the per-seed table to `path`. Nothing is created on error.
pub fn export_metrics(rows: &[MetricsRow], meta: &Metadata, path: &Path, format: Format) -> Result<(), MetricsError> {
    let mut buf = Vec::new();
    write_metrics(rows, meta, format, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn export_summary(rows: &[SummaryRow], meta: &Metadata, path: &Path, format: Format) -> Result<(), MetricsError> {
    let mut buf = Vec::new();
    write_summary(rows, meta, format, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Parses a per-seed table written by [`write_metrics`] in either format.
pub fn read_metrics<R: Read>(mut r: R) -> Result<(Metadata, Vec<MetricsRow>), MetricsError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    if text.trim_start().starts_with('{') {
        let table: JsonRows = serde_json::from_str(&text)?;
        let meta = Metadata {
            entries: table
                .metadata
                .into_iter()
                .map(|(k, v)| (k, v.as_str().map_or_else(|| v.to_string(), str::to_string)))
                .collect(),
        };
        return Ok((meta, table.rows.into_iter().map(MetricsRow::from).collect()));
    }

    let mut meta = Metadata::default();
    let mut skipped = 0u64;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { break };
        skipped += 1;
        let rest = rest.trim_start();
        match rest.split_once('=') {
            Some((k, v)) => meta.push(k.trim(), v),
            None => meta.push(rest, ""),
        }
    }
    let body: String = text.lines().skip(skipped as usize).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ROWS_HEADER {
        return Err(MetricsError::Parse {
            line: skipped + 1,
            message: format!("expected header `{}`", ROWS_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RowRecord>() {
        let rec = rec.map_err(|e| MetricsError::Parse {
            line: skipped + e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        rows.push(rec.into());
    }
    Ok((meta, rows))
}

pub fn load_metrics(path: &Path) -> Result<(Metadata, Vec<MetricsRow>), MetricsError> {
    read_metrics(std::fs::File::open(path)?)
}
