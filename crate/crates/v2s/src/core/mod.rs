//! Shared domain types, configuration, and deterministic randomness.

pub mod config;
pub mod rng;
pub mod types;

pub use config::{validate_config, TrainConfig};
pub use rng::{streams, RngState, SeededRng};
pub use types::{
    samples_per_frame, FeatureSequence, LossWeights, NormalizedSpectrogram, VideoClip, Waveform,
    FRAME_RATE, ROI_SIZE, SAMPLES_PER_FRAME, SAMPLE_RATE,
};
