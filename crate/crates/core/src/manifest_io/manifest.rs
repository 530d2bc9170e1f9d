//! Line-delimited JSON dataset manifests.
//!
//! ```text
//! {"video_id":"v001","subject_id":"s01","label":"real","split":"train",
//!  "frame_paths":["v001/000.png", ...],"landmark_path":"v001.lmk"}
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::landmarks::{load_landmarks, LandmarkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    /// 0 for real (negative class), 1 for fake (positive class).
    pub fn as_binary(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Fake => "fake",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" | "0" => Ok(Label::Real),
            "fake" | "1" => Ok(Label::Fake),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One video: its already-extracted face frames and their landmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub subject_id: String,
    pub label: Label,
    pub frame_paths: Vec<PathBuf>,
    pub landmark_path: PathBuf,
    pub split: Split,
}

impl VideoRecord {
    pub fn n_frames(&self) -> usize {
        self.frame_paths.len()
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate video_id `{video_id}`")]
    DuplicateId { line: usize, video_id: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line} (video `{video_id}`): landmarks: {source}")]
    Landmarks {
        line: usize,
        video_id: String,
        #[source]
        source: LandmarkError,
    },
}

const REQUIRED_FIELDS: [&str; 6] =
    ["video_id", "subject_id", "label", "frame_paths", "landmark_path", "split"];

/// Parses manifest text. Structural checks only; landmark files are not
/// touched. Returns each record with its 1-based line number.
pub fn parse_manifest(text: &str) -> Result<Vec<(usize, VideoRecord)>, ManifestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw)
            .map_err(|e| ManifestError::Parse { line, message: e.to_string() })?;
        let obj = value.as_object().ok_or_else(|| ManifestError::Parse {
            line,
            message: "record is not a JSON object".into(),
        })?;
        if let Some(field) = REQUIRED_FIELDS.iter().find(|f| !obj.contains_key(**f)) {
            return Err(ManifestError::MissingField { line, field });
        }
        let record: VideoRecord = serde_json::from_value(value)
            .map_err(|e| ManifestError::Parse { line, message: e.to_string() })?;
        validate_record(&record).map_err(|message| ManifestError::Invalid { line, message })?;
        if !seen.insert(record.video_id.clone()) {
            return Err(ManifestError::DuplicateId { line, video_id: record.video_id });
        }
        out.push((line, record));
    }
    Ok(out)
}

fn validate_record(record: &VideoRecord) -> Result<(), String> {
    if record.video_id.is_empty() {
        return Err("empty video_id".into());
    }
    if record.frame_paths.is_empty() {
        return Err(format!("video `{}` lists no frames", record.video_id));
    }
    let mut paths = HashSet::new();
    for (i, p) in record.frame_paths.iter().enumerate() {
        if !paths.insert(p) {
            return Err(format!(
                "video `{}`: frame {} repeats path {}",
                record.video_id,
                i,
                p.display()
            ));
        }
    }
    Ok(())
}

/// Loads a manifest and checks every referenced landmark file holds one
/// 68-point set per listed frame.
pub fn load_manifest(path: &Path) -> Result<Vec<VideoRecord>, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = manifest_dir(path);
    let records = parse_manifest(&text)?;
    for (line, record) in &records {
        let lmk = resolve(&base, &record.landmark_path);
        load_landmarks(&lmk, record.n_frames()).map_err(|source| ManifestError::Landmarks {
            line: *line,
            video_id: record.video_id.clone(),
            source,
        })?;
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn format_manifest(records: &[VideoRecord]) -> String {
    let mut out = String::new();
    for r in records {
        // VideoRecord holds only strings, paths and unit enums.
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(records: &[VideoRecord], path: &Path) -> Result<(), ManifestError> {
    std::fs::write(path, format_manifest(records)).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Directory that relative manifest paths are resolved against.
pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
