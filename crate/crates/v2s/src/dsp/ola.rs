//! Overlap-add reconstruction of a long waveform from half-overlapping
//! segments.
//!
//! Segment t (length 2N) is placed at offset t·N, so every interior sample
//! receives exactly two contributions which are averaged with equal weight;
//! the first N samples have a single contributor and pass through unchanged.
//! The trailing N-sample tail past T·N is dropped, making the output length
//! exactly T·N.

use crate::core::Waveform;
use crate::error::{Error, Result};

/// Core overlap-add on raw f64 segments. `segments[t]` must all have length
/// 2·n. Returns `segments.len()·n` samples.
pub fn overlap_add_samples(segments: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if segments.is_empty() {
        return Err(Error::Shape("overlap-add needs at least one segment".into()));
    }
    if n == 0 {
        return Err(Error::Shape("overlap-add hop must be nonzero".into()));
    }
    let two_n = 2 * n;
    for (t, seg) in segments.iter().enumerate() {
        if seg.len() != two_n {
            return Err(Error::Shape(format!(
                "segment {t} has length {}, expected {two_n}",
                seg.len()
            )));
        }
    }
    let t_total = segments.len();
    let mut out = vec![0.0; t_total * n];
    // Head: single contributor.
    out[..n].copy_from_slice(&segments[0][..n]);
    // Interior: sample j in block t ≥ 1 is the mean of segment t's first half
    // and segment t−1's second half.
    for t in 1..t_total {
        for i in 0..n {
            out[t * n + i] = 0.5 * (segments[t][i] + segments[t - 1][n + i]);
        }
    }
    Ok(out)
}

/// Overlap-add returning a `Waveform`; segment values must land in [-1, 1].
pub fn overlap_add(segments: &[Vec<f64>], n: usize, sample_rate: u32) -> Result<Waveform> {
    let samples = overlap_add_samples(segments, n)?;
    Waveform::new(samples.iter().map(|&v| v as f32).collect(), sample_rate)
}
