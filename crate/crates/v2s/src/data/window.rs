//! Aligned fixed-length window sampling for critic training.
//!
//! Critics score short fixed-length excerpts, not whole utterances. This
//! module draws one window position and applies it to both the real and
//! the synthesized waveform so the pair stays time-aligned.

use crate::core::{SeededRng, Waveform};
use crate::error::{Error, Result};

/// A time-aligned pair of fixed-length excerpts plus where they came from.
#[derive(Debug, Clone)]
pub struct ClipWindow {
    pub real: Waveform,
    pub fake: Waveform,
    /// Sample offset of the window within the source waveforms.
    pub start: usize,
}

/// Cuts the same randomly positioned `clip_seconds` window out of both
/// waveforms. Inputs shorter than the window are kept whole and
/// right-padded with zeros instead (no random draw is consumed in that
/// case, so callers can rely on rng state advancing only when there is an
/// actual choice to make).
pub fn sample_clip_window(
    real: &Waveform,
    fake: &Waveform,
    rng: &mut SeededRng,
    clip_seconds: f64,
) -> Result<ClipWindow> {
    if real.sample_rate() != fake.sample_rate() {
        return Err(Error::Shape(format!(
            "cannot window waveforms with different sample rates: {} Hz vs {} Hz",
            real.sample_rate(),
            fake.sample_rate()
        )));
    }
    if real.len() != fake.len() {
        return Err(Error::Shape(format!(
            "cannot window waveforms of different lengths: {} vs {} samples",
            real.len(),
            fake.len()
        )));
    }
    if !(clip_seconds > 0.0 && clip_seconds.is_finite()) {
        return Err(Error::Config(format!(
            "clip_seconds must be positive and finite, got {clip_seconds}"
        )));
    }
    let target = (clip_seconds * real.sample_rate() as f64).round() as usize;
    if target == 0 {
        return Err(Error::Config(format!(
            "clip of {clip_seconds} s at {} Hz is empty",
            real.sample_rate()
        )));
    }

    let len = real.len();
    let (start, cut) = if len > target {
        let start = rng.below(len - target + 1);
        let cut = |w: &Waveform| w.samples()[start..start + target].to_vec();
        (start, (cut(real), cut(fake)))
    } else {
        let pad = |w: &Waveform| {
            let mut s = w.samples().to_vec();
            s.resize(target, 0.0);
            s
        };
        (0, (pad(real), pad(fake)))
    };
    Ok(ClipWindow {
        real: Waveform::new(cut.0, real.sample_rate())?,
        fake: Waveform::new(cut.1, fake.sample_rate())?,
        start,
    })
}
