//! Dataset plumbing: manifests, audio/video containers, augmentation,
//! clip windowing, the external preprocessing adapter, and a synthetic
//! audiovisual corpus for desk-scale experiments.
//!
//! File formats are deliberately minimal and fully specified:
//!
//! - **Manifest**: newline-delimited JSON, one record per line (see
//!   [`ManifestRecord`]).
//! - **Audio**: RIFF WAV, strictly mono 16-bit PCM at 16 kHz.
//! - **Video**: the raw-frame `V2SF` container — magic `"V2SF"`, a version
//!   byte, little-endian `u16` frame count / height / width, then one byte
//!   per pixel, row-major within a frame, frame-major overall. No codec.

mod adapter;
mod augment;
mod container;
mod corpus;
mod dataset;
mod manifest;
mod wav;
mod window;

pub use adapter::preprocess_adapter;
pub use augment::{augment, center_crop};
pub use container::{load_video, save_video};
pub use corpus::{bar_row_for_tone, make_synthetic_corpus, SyntheticSpec, BAR_ROWS};
pub use dataset::{load_split_media, MediaRecord};
pub use manifest::{load_manifest, save_manifest, ManifestRecord, Split};
pub use wav::{load_audio, save_audio};
pub use window::{sample_clip_window, ClipWindow};
