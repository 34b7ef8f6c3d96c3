use super::{atomic_write, fmt_real, parse_manifest, read_text, IoError, Manifest, MANIFEST_FORMAT_VERSION};
use crate::types::{LabelVector, PredictionTensor, SplitSpec};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const PRED_FILE: &str = "predictions";
const LABEL_FILE: &str = "labels";

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Iterates non-empty records as `(line, fields)`.
fn records<'a>(
    text: &'a str,
    file: &'static str,
) -> impl Iterator<Item = Result<(usize, csv::StringRecord), IoError>> + 'a {
    reader(text).into_records().filter_map(move |r| match r {
        Ok(rec) => {
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                None
            } else {
                Some(Ok((line, rec)))
            }
        }
        Err(e) => {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Some(Err(IoError::parse(file, line, e.to_string())))
        }
    })
}

fn check_header(line: usize, rec: &csv::StringRecord, expected: &[String], file: &str) -> Result<(), IoError> {
    if rec.iter().ne(expected.iter().map(String::as_str)) {
        return Err(IoError::parse(
            file,
            line,
            format!(
                "expected header '{}', found '{}'",
                expected.join(","),
                rec.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

fn index_field(
    rec: &csv::StringRecord,
    k: usize,
    limit: usize,
    what: &str,
    line: usize,
    file: &str,
) -> Result<usize, IoError> {
    let s = &rec[k];
    let v: usize = s
        .parse()
        .map_err(|_| IoError::parse(file, line, format!("invalid {what} '{s}'")))?;
    if v >= limit {
        return Err(IoError::parse(
            file,
            line,
            format!("{what} {v} out of range (< {limit})"),
        ));
    }
    Ok(v)
}

/// Parses the `model_id,sample_id,p_0,…` table against the manifest's sizes.
///
/// Every `(model, sample)` pair must appear exactly once, in any order. The
/// result is validated; rows within tolerance of unit sum are renormalized.
pub fn parse_predictions(text: &str, m: &Manifest) -> Result<PredictionTensor, IoError> {
    let (nm, ns, nc) = (m.num_models, m.num_samples, m.num_classes);
    let total = nm
        .checked_mul(ns)
        .and_then(|v| v.checked_mul(nc))
        .filter(|&v| v <= 1 << 28)
        .ok_or_else(|| IoError::parse(PRED_FILE, 1, format!("tensor {nm}x{ns}x{nc} is too large")))?;
    let mut header: Vec<String> = vec!["model_id".into(), "sample_id".into()];
    header.extend((0..nc).map(|j| format!("p_{j}")));

    let mut probs = vec![0.0; total];
    let mut seen = vec![false; nm * ns];
    let mut count = 0;
    let mut last_line = 1;
    let mut it = records(text, PRED_FILE);
    match it.next() {
        None => return Err(IoError::parse(PRED_FILE, 1, "empty file")),
        Some(r) => {
            let (line, rec) = r?;
            check_header(line, &rec, &header, PRED_FILE)?;
        }
    }
    for r in it {
        let (line, rec) = r?;
        last_line = line;
        if rec.len() != nc + 2 {
            return Err(IoError::parse(
                PRED_FILE,
                line,
                format!("expected {} fields, found {}", nc + 2, rec.len()),
            ));
        }
        let i = index_field(&rec, 0, nm, "model_id", line, PRED_FILE)?;
        let n = index_field(&rec, 1, ns, "sample_id", line, PRED_FILE)?;
        if std::mem::replace(&mut seen[i * ns + n], true) {
            return Err(IoError::parse(
                PRED_FILE,
                line,
                format!("duplicate row for model {i}, sample {n}"),
            ));
        }
        let start = (i * ns + n) * nc;
        for j in 0..nc {
            let s = &rec[j + 2];
            probs[start + j] = s
                .parse()
                .map_err(|_| IoError::parse(PRED_FILE, line, format!("invalid probability '{s}'")))?;
        }
        count += 1;
    }
    if count != nm * ns {
        let missing = seen.iter().position(|&s| !s).unwrap_or(0);
        return Err(IoError::parse(
            PRED_FILE,
            last_line,
            format!("missing row for model {}, sample {}", missing / ns, missing % ns),
        ));
    }
    Ok(PredictionTensor::new(nm, ns, nc, probs)?)
}

/// Parses the `sample_id,label` table.
pub fn parse_labels(text: &str, m: &Manifest) -> Result<LabelVector, IoError> {
    let ns = m.num_samples;
    let mut labels = vec![0usize; ns];
    let mut seen = vec![false; ns];
    let mut last_line = 1;
    let mut it = records(text, LABEL_FILE);
    match it.next() {
        None => return Err(IoError::parse(LABEL_FILE, 1, "empty file")),
        Some(r) => {
            let (line, rec) = r?;
            check_header(line, &rec, &["sample_id".into(), "label".into()], LABEL_FILE)?;
        }
    }
    for r in it {
        let (line, rec) = r?;
        last_line = line;
        if rec.len() != 2 {
            return Err(IoError::parse(
                LABEL_FILE,
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let n = index_field(&rec, 0, ns, "sample_id", line, LABEL_FILE)?;
        if std::mem::replace(&mut seen[n], true) {
            return Err(IoError::parse(
                LABEL_FILE,
                line,
                format!("duplicate label for sample {n}"),
            ));
        }
        let s = &rec[1];
        labels[n] = s
            .parse()
            .map_err(|_| IoError::parse(LABEL_FILE, line, format!("invalid label '{s}'")))?;
    }
    if let Some(n) = seen.iter().position(|&s| !s) {
        return Err(IoError::parse(
            LABEL_FILE,
            last_line,
            format!("missing label for sample {n}"),
        ));
    }
    Ok(LabelVector::new(labels, m.num_classes)?)
}

/// Loads a manifest and its tables. Table paths are resolved against the
/// manifest's directory.
pub fn read_predictions(manifest_path: &Path) -> Result<(PredictionTensor, LabelVector, SplitSpec), IoError> {
    let m = parse_manifest(&read_text(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let tensor = parse_predictions(&read_text(&base.join(&m.predictions))?, &m)?;
    let labels = parse_labels(&read_text(&base.join(&m.labels))?, &m)?;
    let split = m.split_or_default();
    split.validate(m.num_samples)?;
    Ok((tensor, labels, split))
}

/// Paths written by [`write_predictions`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionFiles {
    pub manifest: PathBuf,
    pub predictions: PathBuf,
    pub labels: PathBuf,
}

pub fn render_predictions(t: &PredictionTensor) -> String {
    let c = t.num_classes();
    let mut out = String::from("model_id,sample_id");
    for j in 0..c {
        let _ = write!(out, ",p_{j}");
    }
    out.push('\n');
    for i in 0..t.num_models() {
        for n in 0..t.num_samples() {
            let _ = write!(out, "{i},{n}");
            for &p in t.row(i, n) {
                out.push(',');
                out.push_str(&fmt_real(p));
            }
            out.push('\n');
        }
    }
    out
}

pub fn render_labels(y: &LabelVector) -> String {
    let mut out = String::from("sample_id,label\n");
    for (n, l) in y.labels().iter().enumerate() {
        let _ = writeln!(out, "{n},{l}");
    }
    out
}

/// Writes `manifest.toml`, `predictions.csv` and `labels.csv` into `dir`.
/// The manifest is written last, so it never points at missing tables.
pub fn write_predictions(
    dir: &Path,
    t: &PredictionTensor,
    y: &LabelVector,
    split: &SplitSpec,
    provenance: &str,
) -> Result<PredictionFiles, IoError> {
    let files = PredictionFiles {
        manifest: dir.join("manifest.toml"),
        predictions: dir.join("predictions.csv"),
        labels: dir.join("labels.csv"),
    };
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        num_models: t.num_models(),
        num_samples: t.num_samples(),
        num_classes: t.num_classes(),
        predictions: "predictions.csv".into(),
        labels: "labels.csv".into(),
        provenance: provenance.into(),
        split: Some(split.clone()),
    };
    atomic_write(&files.predictions, render_predictions(t).as_bytes())?;
    atomic_write(&files.labels, render_labels(y).as_bytes())?;
    atomic_write(&files.manifest, manifest.render().as_bytes())?;
    Ok(files)
}
