use super::{atomic_write, fmt_real, read_text, IoError};
use crate::pipeline::{PruneReport, REPORT_FORMAT_VERSION};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

const REPORT_FILE: &str = "report";
const SUMMARY_FILE: &str = "summary";

/// Column names of the summary table, in order.
pub const SUMMARY_COLUMNS: [&str; 5] = [
    "accuracy_full",
    "accuracy_pruned",
    "models_full",
    "models_pruned",
    "threshold",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    /// The full report as JSON.
    #[default]
    Json,
    /// One table row: full vs pruned accuracy, model counts, threshold.
    CsvSummary,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" | "json-text" => Ok(ReportFormat::Json),
            "csv" | "csv-summary" => Ok(ReportFormat::CsvSummary),
            other => Err(format!("unknown report format '{other}' (expected json or csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub accuracy_full: f64,
    pub accuracy_pruned: f64,
    pub models_full: usize,
    pub models_pruned: usize,
    pub threshold: f64,
}

impl From<&PruneReport> for ReportSummary {
    fn from(r: &PruneReport) -> Self {
        Self {
            accuracy_full: r.full_accuracy,
            accuracy_pruned: r.pruned_accuracy,
            models_full: r.num_models_full,
            models_pruned: r.num_models_pruned,
            threshold: r.threshold_used,
        }
    }
}

pub fn render_report(r: &PruneReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::CsvSummary => {
            let s = ReportSummary::from(r);
            format!(
                "{}\n{},{},{},{},{}\n",
                SUMMARY_COLUMNS.join(","),
                fmt_real(s.accuracy_full),
                fmt_real(s.accuracy_pruned),
                s.models_full,
                s.models_pruned,
                fmt_real(s.threshold)
            )
        }
    }
}

pub fn write_report(r: &PruneReport, path: &Path, format: ReportFormat) -> Result<(), IoError> {
    atomic_write(path, render_report(r, format).as_bytes())
}

/// Parses a JSON report, checking `format_version` first.
pub fn parse_report(text: &str) -> Result<PruneReport, IoError> {
    let json_err = |e: serde_json::Error| IoError::parse(REPORT_FILE, e.line().max(1), e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    match value.get("format_version").and_then(serde_json::Value::as_i64) {
        Some(v) if v == REPORT_FORMAT_VERSION as i64 => {}
        Some(v) => {
            return Err(IoError::VersionMismatch {
                found: v,
                expected: REPORT_FORMAT_VERSION as i64,
            })
        }
        None => return Err(IoError::parse(REPORT_FILE, 1, "missing integer format_version")),
    }
    serde_json::from_str(text).map_err(json_err)
}

pub fn read_report(path: &Path) -> Result<PruneReport, IoError> {
    parse_report(&read_text(path)?)
}

pub fn parse_summary(text: &str) -> Result<ReportSummary, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::parse(SUMMARY_FILE, 1, "empty file"))?;
    if header.split(',').map(str::trim).ne(SUMMARY_COLUMNS) {
        return Err(IoError::parse(
            SUMMARY_FILE,
            1,
            format!("expected header '{}'", SUMMARY_COLUMNS.join(",")),
        ));
    }
    let (idx, row) = lines
        .next()
        .ok_or_else(|| IoError::parse(SUMMARY_FILE, 2, "missing summary row"))?;
    let line = idx + 1;
    if let Some((extra, _)) = lines.next() {
        return Err(IoError::parse(SUMMARY_FILE, extra + 1, "more than one summary row"));
    }
    let fields: Vec<&str> = row.split(',').map(str::trim).collect();
    if fields.len() != SUMMARY_COLUMNS.len() {
        return Err(IoError::parse(
            SUMMARY_FILE,
            line,
            format!("expected {} fields, found {}", SUMMARY_COLUMNS.len(), fields.len()),
        ));
    }
    let real = |k: usize| -> Result<f64, IoError> {
        fields[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            IoError::parse(
                SUMMARY_FILE,
                line,
                format!("invalid {} '{}'", SUMMARY_COLUMNS[k], fields[k]),
            )
        })
    };
    let count = |k: usize| -> Result<usize, IoError> {
        fields[k].parse().map_err(|_| {
            IoError::parse(
                SUMMARY_FILE,
                line,
                format!("invalid {} '{}'", SUMMARY_COLUMNS[k], fields[k]),
            )
        })
    };
    Ok(ReportSummary {
        accuracy_full: real(0)?,
        accuracy_pruned: real(1)?,
        models_full: count(2)?,
        models_pruned: count(3)?,
        threshold: real(4)?,
    })
}

pub fn read_summary(path: &Path) -> Result<ReportSummary, IoError> {
    parse_summary(&read_text(path)?)
}
