//! Domain value types shared across the crate.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Default audio sample rate in Hz.
pub const SAMPLE_RATE: u32 = 16_000;
/// Default video frame rate in frames per second.
pub const FRAME_RATE: u32 = 25;
/// Default mouth-ROI resolution (square).
pub const ROI_SIZE: usize = 96;
/// Audio samples per video frame at the default rates.
pub const SAMPLES_PER_FRAME: usize = (SAMPLE_RATE / FRAME_RATE) as usize;

/// Samples of audio per video frame: `sample_rate / frame_rate`.
///
/// The ratio must be an exact integer; fractional samples per frame would
/// break segment alignment everywhere downstream.
pub fn samples_per_frame(sample_rate: u32, frame_rate: u32) -> Result<usize> {
    if frame_rate == 0 {
        return Err(Error::Config("frame_rate must be > 0".into()));
    }
    if sample_rate % frame_rate != 0 {
        return Err(Error::Config(format!(
            "frame rate {frame_rate} fps does not evenly divide sample rate {sample_rate} Hz"
        )));
    }
    Ok((sample_rate / frame_rate) as usize)
}

/// A temporal stack of single-channel mouth-ROI frames with intensities
/// in `[0, 1]`, shaped `(T, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Array3<f32>,
    frame_rate: u32,
}

impl VideoClip {
    pub fn new(frames: Array3<f32>, frame_rate: u32) -> Result<Self> {
        let (t, h, w) = frames.dim();
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "video clip must be non-empty, got {t}x{h}x{w}"
            )));
        }
        if frame_rate == 0 {
            return Err(Error::Config("frame_rate must be > 0".into()));
        }
        if let Some(bad) = frames.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!(
                "frame intensity {bad} outside [0, 1]"
            )));
        }
        Ok(VideoClip { frames, frame_rate })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dim().0
    }

    pub fn height(&self) -> usize {
        self.frames.dim().1
    }

    pub fn width(&self) -> usize {
        self.frames.dim().2
    }

    pub fn frame_rate(&self) -> u32 {
        self.frame_rate
    }

    pub fn frames(&self) -> &Array3<f32> {
        &self.frames
    }

    pub fn into_frames(self) -> Array3<f32> {
        self.frames
    }
}

/// Mono audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl Waveform {
    /// Strict constructor: rejects out-of-range samples.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be > 0".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::Format(format!("sample value {bad} outside [-1, 1]")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    /// Lenient constructor for ingested real audio: clamps into `[-1, 1]`.
    pub fn clamped(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        Waveform::new(samples, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples widened to f64 for DSP work.
    pub fn samples_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    /// Root-mean-square energy.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }
}

/// One feature vector per video frame, shaped `(T, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub features: Array2<f32>,
}

impl FeatureSequence {
    pub fn num_frames(&self) -> usize {
        self.features.dim().0
    }

    pub fn dim(&self) -> usize {
        self.features.dim().1
    }
}

/// Log-power STFT magnitudes after standardization, clipping to `[-3, 3]`
/// and rescaling to `[-1, 1]`. Shaped `(F, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSpectrogram {
    values: Array2<f64>,
}

impl NormalizedSpectrogram {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!(
                "normalized spectrogram value {bad} outside [-1, 1]"
            )));
        }
        Ok(NormalizedSpectrogram { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_bins(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_frames(&self) -> usize {
        self.values.dim().1
    }
}

/// Coefficients of the generator objective and the gradient penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha_adv: f64,
    pub alpha_pase: f64,
    pub alpha_power: f64,
    pub alpha_mfcc: f64,
    pub gp_lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha_adv: 1.0,
            alpha_pase: 140.0,
            alpha_power: 50.0,
            alpha_mfcc: 0.4,
            gp_lambda: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha_adv", self.alpha_adv),
            ("alpha_pase", self.alpha_pase),
            ("alpha_power", self.alpha_power),
            ("alpha_mfcc", self.alpha_mfcc),
            ("gp_lambda", self.gp_lambda),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}
