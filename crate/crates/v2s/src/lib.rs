//! End-to-end video-to-speech synthesis: a convolutional-recurrent video
//! encoder and transposed-convolution waveform decoder trained adversarially
//! against waveform and spectrogram critics, with spectral reconstruction
//! losses, plus the evaluation metrics (STOI, MCD, WER) needed to judge the
//! output.
//!
//! Everything is CPU-only, deterministic under a fixed seed, and sized so a
//! scaled-down model can overfit a synthetic audiovisual corpus on a desktop.
//! The `examples/` directory walks through each capability end to end; the
//! `v2s` binary exposes the same operations as subcommands.

pub mod cli;
pub mod core;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod training;

pub use error::{Error, Result};
