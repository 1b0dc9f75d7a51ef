//! The `V2SF` raw-frame video container.
//!
//! Layout, all little-endian: magic `"V2SF"`, version `u8` (currently 1),
//! `u16` frame count, `u16` height, `u16` width, then `T·H·W` bytes of
//! 8-bit intensities, row-major within each frame, frames in order. Storing
//! raw bytes keeps the core artifact free of any video-codec dependency.

use std::path::Path;

use ndarray::Array3;

use crate::core::{VideoClip, FRAME_RATE};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"V2SF";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 6;

/// Reads a container into a [`VideoClip`] with intensities mapped to
/// `[0, 1]` by `byte / 255`. The clip is stamped with the fixed 25 fps
/// frame rate — the container stores geometry only.
pub fn load_video(path: &Path) -> Result<VideoClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "{}: not a V2SF raw-frame container",
            path.display()
        )));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "{}: V2SF version {} unsupported, expected {VERSION}",
            path.display(),
            bytes[4]
        )));
    }
    let dim = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]) as usize;
    let (t, h, w) = (dim(5), dim(7), dim(9));
    let expected = HEADER_LEN + t * h * w;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: {}×{}×{} container needs {expected} bytes, file has {}",
            path.display(),
            t,
            h,
            w,
            bytes.len()
        )));
    }
    let frames = Array3::from_shape_vec(
        (t, h, w),
        bytes[HEADER_LEN..].iter().map(|&b| b as f32 / 255.0).collect(),
    )
    .expect("length checked above");
    VideoClip::new(frames, FRAME_RATE)
}

/// Writes a [`VideoClip`] as a `V2SF` container, quantizing intensities
/// with round-to-nearest so the round trip is exact to 1/255.
pub fn save_video(path: &Path, clip: &VideoClip) -> Result<()> {
    let (t, h, w) = clip.frames().dim();
    let too_big = |name: &str, v: usize| {
        Error::Format(format!("{name} {v} exceeds the container's u16 limit"))
    };
    let as_u16 = |name: &str, v: usize| -> Result<u16> {
        u16::try_from(v).map_err(|_| too_big(name, v))
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + t * h * w);
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.extend_from_slice(&as_u16("frame count", t)?.to_le_bytes());
    bytes.extend_from_slice(&as_u16("height", h)?.to_le_bytes());
    bytes.extend_from_slice(&as_u16("width", w)?.to_le_bytes());
    bytes.extend(clip.frames().iter().map(|&v| (v * 255.0).round() as u8));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
