//! Loading a manifest split's media into memory.
//!
//! Desk-scale corpora fit comfortably in RAM, so training and evaluation
//! both start by materializing one split completely rather than streaming.

use std::path::Path;

use crate::core::{VideoClip, Waveform};
use crate::data::manifest::{load_manifest, ManifestRecord, Split};
use crate::data::{load_audio, load_video};
use crate::error::{Error, Result};

/// One manifest entry with its media decoded.
#[derive(Debug, Clone)]
pub struct MediaRecord {
    pub record: ManifestRecord,
    pub video: VideoClip,
    pub audio: Waveform,
}

/// Loads every clip of `split`, in manifest order. Media errors are
/// annotated with the offending record's id.
pub fn load_split_media(manifest_path: &Path, split: Split) -> Result<Vec<MediaRecord>> {
    let mut out = Vec::new();
    for record in load_manifest(manifest_path)? {
        if record.split != split {
            continue;
        }
        let tag = |e: Error| Error::Format(format!("clip {:?}: {e}", record.id));
        let video = load_video(&record.video_path).map_err(tag)?;
        let audio = load_audio(&record.audio_path).map_err(tag)?;
        out.push(MediaRecord {
            record,
            video,
            audio,
        });
    }
    Ok(out)
}
