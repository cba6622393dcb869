//! Segment manifests (`audio_path,start_sample,end_sample,label,split`) and
//! label folding maps (`raw,folded`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Absolute, or relative to the manifest's directory when loaded from disk.
    pub audio_path: PathBuf,
    pub start_sample: usize,
    pub end_sample: usize,
    pub label: String,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = self.entries.iter().map(|e| e.label.clone()).collect();
        l.sort();
        l.dedup();
        l
    }
}

#[derive(Deserialize)]
struct RawEntry {
    audio_path: String,
    start_sample: String,
    end_sample: String,
    label: String,
    split: String,
}

const COLUMNS: [&str; 5] = ["audio_path", "start_sample", "end_sample", "label", "split"];

/// Parses manifest text. Relative audio paths are joined onto `base_dir`.
pub fn parse_manifest(text: &str, source: &Path, base_dir: &Path) -> Result<DatasetManifest> {
    let parse_err = |line: u64, message: String| Error::Parse { path: source.to_path_buf(), line: line as usize, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(parse_err(1, format!("header must be {}", COLUMNS.join(","))));
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let raw: RawEntry = record.deserialize(Some(&headers)).map_err(|e| parse_err(line, e.to_string()))?;
        let int = |field: &str, v: &str| v.parse::<usize>().map_err(|_| parse_err(line, format!("{field} {v:?} is not a non-negative integer")));
        let start_sample = int("start_sample", &raw.start_sample)?;
        let end_sample = int("end_sample", &raw.end_sample)?;
        if start_sample >= end_sample {
            return Err(parse_err(line, format!("start_sample {start_sample} must be less than end_sample {end_sample}")));
        }
        if raw.label.is_empty() {
            return Err(parse_err(line, "empty label".into()));
        }
        if raw.audio_path.is_empty() {
            return Err(parse_err(line, "empty audio_path".into()));
        }
        let split = raw.split.parse().map_err(|m| parse_err(line, m))?;
        let p = PathBuf::from(&raw.audio_path);
        let audio_path = if p.is_absolute() { p } else { base_dir.join(p) };
        entries.push(ManifestEntry { audio_path, start_sample, end_sample, label: raw.label, split });
    }
    Ok(DatasetManifest { entries })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, path, base)
}

pub fn write_manifest(manifest: &DatasetManifest) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for e in &manifest.entries {
        let split = match e.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        w.write_record([
            e.audio_path.to_string_lossy().as_ref(),
            &e.start_sample.to_string(),
            &e.end_sample.to_string(),
            &e.label,
            split,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelFolding {
    pub map: BTreeMap<String, String>,
}

impl LabelFolding {
    pub fn fold<'a>(&'a self, label: &str) -> Option<&'a str> {
        self.map.get(label).map(String::as_str)
    }
}

pub fn parse_folding(text: &str, source: &Path) -> Result<LabelFolding> {
    let parse_err = |line: u64, message: String| Error::Parse { path: source.to_path_buf(), line: line as usize, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["raw", "folded"] {
        return Err(parse_err(1, "header must be raw,folded".into()));
    }
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let (raw, folded) = (&record[0], &record[1]);
        if raw.is_empty() || folded.is_empty() {
            return Err(parse_err(line, "empty label".into()));
        }
        if let Some(prev) = map.insert(raw.to_string(), folded.to_string()) {
            if prev != folded {
                return Err(parse_err(line, format!("{raw:?} folded to both {prev:?} and {folded:?}")));
            }
        }
    }
    Ok(LabelFolding { map })
}

pub fn load_folding(path: impl AsRef<Path>) -> Result<LabelFolding> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_folding(&text, path)
}

pub fn fold_labels(manifest: &DatasetManifest, folding: &LabelFolding) -> Result<DatasetManifest> {
    let entries = manifest
        .entries
        .iter()
        .map(|e| {
            let label = folding.fold(&e.label).ok_or_else(|| Error::UnmappedLabel(e.label.clone()))?;
            Ok(ManifestEntry { label: label.to_string(), ..e.clone() })
        })
        .collect::<Result<_>>()?;
    Ok(DatasetManifest { entries })
}
