use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("manifest is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("manifest has no entries")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    AMD,
    CNV,
    CSC,
    DR,
    RVO,
    Normal,
    Other,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::AMD,
        Group::CNV,
        Group::CSC,
        Group::DR,
        Group::RVO,
        Group::Normal,
        Group::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::AMD => "AMD",
            Group::CNV => "CNV",
            Group::CSC => "CSC",
            Group::DR => "DR",
            Group::RVO => "RVO",
            Group::Normal => "Normal",
            Group::Other => "Other",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;

    /// Case-insensitive match against the closed label set.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown group `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Mm3,
    Mm6,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Mm3 => "mm3",
            Resolution::Mm6 => "mm6",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mm3" => Ok(Resolution::Mm3),
            "mm6" => Ok(Resolution::Mm6),
            _ => Err(format!("unknown resolution `{s}` (expected mm3 or mm6)")),
        }
    }
}

/// One TR/GT image pair.
///
/// `tr_path` and `gt_path` are resolved against the manifest's directory;
/// `tr_ref` and `gt_ref` keep the strings as written, which is also the key
/// used to look up external embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub line: u64,
    pub patient_id: String,
    pub group: Group,
    pub resolution: Resolution,
    pub tr_ref: String,
    pub gt_ref: String,
    pub tr_path: PathBuf,
    pub gt_path: PathBuf,
}

const COLUMNS: [&str; 5] = ["patient_id", "group", "resolution", "tr_path", "gt_path"];

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest_str(&text, base)
}

/// Parses manifest text, resolving relative image paths against `base`.
pub fn parse_manifest_str(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ManifestError::Invalid {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ManifestError::MissingColumn(name))?;
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| ManifestError::Invalid {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let invalid = |message: String| ManifestError::Invalid { line, message };
        let field = |i: usize| record.get(index[i]).unwrap_or("");

        let patient_id = field(0).to_string();
        if patient_id.is_empty() {
            return Err(invalid("empty patient_id".to_string()));
        }
        let group: Group = field(1).parse().map_err(invalid)?;
        let resolution: Resolution = field(2).parse().map_err(invalid)?;
        let (tr_ref, gt_ref) = (field(3).to_string(), field(4).to_string());
        if tr_ref.is_empty() || gt_ref.is_empty() {
            return Err(invalid("empty image path".to_string()));
        }
        let (tr_path, gt_path) = (base.join(&tr_ref), base.join(&gt_ref));
        if tr_path == gt_path {
            return Err(invalid(format!("tr_path and gt_path are both `{tr_ref}`")));
        }
        if !seen.insert((patient_id.clone(), resolution)) {
            return Err(invalid(format!(
                "duplicate entry for patient `{patient_id}` at {resolution}"
            )));
        }
        entries.push(ManifestEntry {
            line,
            patient_id,
            group,
            resolution,
            tr_ref,
            gt_ref,
            tr_path,
            gt_path,
        });
    }
    if entries.is_empty() {
        return Err(ManifestError::Empty);
    }
    Ok(entries)
}
