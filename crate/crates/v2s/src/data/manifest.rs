//! Newline-delimited JSON dataset manifests.

use std::collections::HashSet;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which partition a clip belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One clip: where its media lives and how it is partitioned.
///
/// Relative `video_path`/`audio_path` values are resolved against the
/// manifest's own directory at load time, so a corpus directory can be
/// moved wholesale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub video_path: PathBuf,
    pub audio_path: PathBuf,
    /// May be empty for untranscribed clips.
    pub transcript: String,
    pub speaker_id: String,
    pub split: Split,
}

/// Parses a manifest file, resolving relative media paths against the
/// manifest's directory. Blank lines are ignored; anything else must be a
/// complete record. Duplicate ids are rejected.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut record: ManifestRecord = serde_json::from_str(line).map_err(|e| {
            Error::Format(format!(
                "manifest line {}: not a valid record: {e}",
                idx + 1
            ))
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Format(format!(
                "manifest line {}: duplicate id {:?}",
                idx + 1,
                record.id
            )));
        }
        if record.video_path.is_relative() {
            record.video_path = base.join(&record.video_path);
        }
        if record.audio_path.is_relative() {
            record.audio_path = base.join(&record.audio_path);
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records as one JSON object per line. Paths are written as given;
/// keep them relative to `path`'s directory for a relocatable corpus.
pub fn save_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Format(format!("cannot serialize record {:?}: {e}", record.id)))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
