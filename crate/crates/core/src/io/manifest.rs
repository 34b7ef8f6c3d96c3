use super::{line_of, IoError};
use crate::types::SplitSpec;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FORMAT_VERSION: i64 = 1;

const FILE: &str = "manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: i64,
    pub num_models: usize,
    pub num_samples: usize,
    pub num_classes: usize,
    pub predictions: String,
    pub labels: String,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
}

impl Manifest {
    /// The manifest's split, or the default split when none is given.
    pub fn split_or_default(&self) -> SplitSpec {
        self.split
            .clone()
            .unwrap_or_else(|| SplitSpec::default_for(self.num_samples))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("manifest fields are always representable")
    }
}

/// Parses manifest text. The version is checked before the remaining fields,
/// so a future manifest reports [`IoError::VersionMismatch`] rather than a
/// field error.
pub fn parse_manifest(text: &str) -> Result<Manifest, IoError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| toml_error(text, &e))?;
    match table.get("format_version") {
        None => return Err(IoError::parse(FILE, 1, "missing format_version")),
        Some(toml::Value::Integer(v)) if *v == MANIFEST_FORMAT_VERSION => {}
        Some(toml::Value::Integer(v)) => {
            return Err(IoError::VersionMismatch {
                found: *v,
                expected: MANIFEST_FORMAT_VERSION,
            })
        }
        Some(_) => return Err(IoError::parse(FILE, 1, "format_version must be an integer")),
    }
    let m: Manifest = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if m.num_models == 0 || m.num_samples == 0 || m.num_classes < 2 {
        return Err(IoError::parse(
            FILE,
            1,
            format!(
                "sizes must be positive with at least 2 classes (got {}x{}x{})",
                m.num_models, m.num_samples, m.num_classes
            ),
        ));
    }
    Ok(m)
}

fn toml_error(text: &str, e: &toml::de::Error) -> IoError {
    let line = e.span().map_or(1, |s| line_of(text, s.start));
    IoError::parse(FILE, line, e.message().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "format_version = 1\nnum_models = 2\nnum_samples = 3\nnum_classes = 2\npredictions = \"p.csv\"\nlabels = \"l.csv\"\n";

    #[test]
    fn parses_minimal() {
        let m = parse_manifest(BASIC).unwrap();
        assert_eq!((m.num_models, m.num_samples, m.num_classes), (2, 3, 2));
        assert_eq!(m.split, None);
        assert_eq!(m.split_or_default(), SplitSpec::default_for(3));
    }

    #[test]
    fn render_round_trip() {
        let mut m = parse_manifest(BASIC).unwrap();
        m.split = Some(SplitSpec {
            train: vec![0],
            valid: vec![1],
            test: vec![2],
        });
        m.provenance = "unit \"test\"".into();
        assert_eq!(parse_manifest(&m.render()).unwrap(), m);
    }

    #[test]
    fn version_mismatch() {
        let text = BASIC.replace("format_version = 1", "format_version = 2");
        assert_eq!(
            parse_manifest(&text),
            Err(IoError::VersionMismatch { found: 2, expected: 1 })
        );
    }

    #[test]
    fn errors_carry_lines() {
        let text = BASIC.replace("num_classes = 2", "num_classes = \"two\"");
        assert!(matches!(parse_manifest(&text), Err(IoError::Parse { line: 4, .. })));
        assert!(matches!(
            parse_manifest("format_version = 1\n[[["),
            Err(IoError::Parse { line: 2, .. })
        ));
        let extra = format!("{BASIC}colour = \"red\"\n");
        assert!(matches!(parse_manifest(&extra), Err(IoError::Parse { .. })));
        assert!(matches!(
            parse_manifest(&BASIC.replace("num_classes = 2", "num_classes = 1")),
            Err(IoError::Parse { .. })
        ));
    }
}
