//! On-disk formats: prediction manifests, prediction and label tables, reports.
//!
//! A prediction set is a TOML manifest next to two CSV tables:
//!
//! ```toml
//! format_version = 1
//! num_models = 2
//! num_samples = 3
//! num_classes = 2
//! predictions = "predictions.csv"   # model_id,sample_id,p_0,...,p_{C-1}
//! labels = "labels.csv"             # sample_id,label
//! provenance = "free text"
//!
//! [split]                           # optional; 60/20/20 contiguous if absent
//! train = [0]
//! valid = [1]
//! test = [2]
//! ```
//!
//! Table paths are relative to the manifest. Reals are written with 17
//! significant digits. Every write goes to a temporary file in the target
//! directory and is renamed into place.

mod manifest;
mod predictions;
mod report;

pub use manifest::{parse_manifest, Manifest, MANIFEST_FORMAT_VERSION};
pub use predictions::{
    parse_labels, parse_predictions, read_predictions, render_labels, render_predictions, write_predictions,
    PredictionFiles,
};
pub use report::{
    parse_report, parse_summary, read_report, read_summary, render_report, write_report, ReportFormat, ReportSummary,
    SUMMARY_COLUMNS,
};

use crate::types::ValidationError;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
    #[error("unsupported format_version {found} (expected {expected})")]
    VersionMismatch { found: i64, expected: i64 },
}

impl IoError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Formats a real with 17 significant digits.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `path` through a temporary sibling and an atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// 1-based line of byte offset `pos` in `text`.
pub(crate) fn line_of(text: &str, pos: usize) -> usize {
    text.as_bytes()[..pos.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first version, rather long").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_reports_missing_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.txt");
        assert!(matches!(atomic_write(&path, b"x"), Err(IoError::Io { .. })));
    }

    #[test]
    fn real_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 0.0, 0.9999999999999999] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn line_numbers() {
        assert_eq!(line_of("a\nb\nc", 0), 1);
        assert_eq!(line_of("a\nb\nc", 2), 2);
        assert_eq!(line_of("a\nb\nc", 99), 3);
    }
}
