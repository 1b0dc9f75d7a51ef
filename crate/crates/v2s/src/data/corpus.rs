//! Synthetic audiovisual corpus with a known video-to-audio mapping.
//!
//! Each clip pairs a pure-tone audio track with a video that displays the
//! identity of the current tone: frame `t` shows a white horizontal bar on
//! a black background whose vertical position encodes which tone sounds
//! during that frame's audio segment. Because the mapping is exact and
//! local, a correct model can drive reconstruction error arbitrarily low,
//! which makes the corpus a learnability oracle for the whole pipeline:
//! if training cannot overfit this, the defect is in the code, not the
//! data.
//!
//! Audio is a single sine per 640-sample frame segment at amplitude 0.5,
//! with phase carried across segment boundaries so tone changes do not
//! introduce clicks. Transcripts are the space-separated tone indices, so
//! recognition-style metrics have ground truth too.

use std::path::{Path, PathBuf};

use crate::core::rng::streams;
use crate::core::{SeededRng, VideoClip, Waveform, ROI_SIZE, SAMPLES_PER_FRAME};
use crate::core::{FRAME_RATE, SAMPLE_RATE};
use crate::data::manifest::{save_manifest, ManifestRecord, Split};
use crate::data::{save_audio, save_video};
use crate::error::{Error, Result};

/// Height of the white bar in pixels.
pub const BAR_ROWS: usize = 8;
/// Vertical inset keeping the bar inside every training-time crop window.
const BAR_MARGIN: usize = 12;

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_clips: usize,
    pub frames_per_clip: usize,
    /// Tone frequencies in Hz; frame segments pick from these uniformly.
    pub tones: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_clips: 20,
            frames_per_clip: 25,
            // Multiples of 25 Hz sit exactly on the per-segment DFT grid.
            tones: vec![250.0, 450.0, 650.0, 850.0, 1050.0, 1250.0],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.num_clips == 0 || self.frames_per_clip == 0 {
            return Err(Error::Config(format!(
                "corpus needs at least one clip and one frame, got {} clips x {} frames",
                self.num_clips, self.frames_per_clip
            )));
        }
        if self.tones.is_empty() {
            return Err(Error::Config("corpus needs at least one tone".into()));
        }
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        for &f in &self.tones {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::Config(format!(
                    "tone {f} Hz outside the representable range (0, {nyquist})"
                )));
            }
        }
        Ok(())
    }
}

/// Top row of the bar that encodes tone `index` out of `num_tones`.
///
/// Positions are spread over the frame interior with a fixed inset on both
/// ends, so every random crop the augmenter can draw still contains the
/// whole bar.
pub fn bar_row_for_tone(index: usize, num_tones: usize) -> usize {
    assert!(index < num_tones, "tone index {index} out of {num_tones}");
    let span = ROI_SIZE - 2 * BAR_MARGIN - BAR_ROWS;
    if num_tones == 1 {
        return BAR_MARGIN + span / 2;
    }
    let offset = (index as f64 * span as f64 / (num_tones - 1) as f64).round() as usize;
    BAR_MARGIN + offset
}

fn render_frames(tone_indices: &[usize], num_tones: usize) -> VideoClip {
    let mut frames = ndarray::Array3::zeros((tone_indices.len(), ROI_SIZE, ROI_SIZE));
    for (t, &idx) in tone_indices.iter().enumerate() {
        let top = bar_row_for_tone(idx, num_tones);
        frames
            .slice_mut(ndarray::s![t, top..top + BAR_ROWS, ..])
            .fill(1.0);
    }
    VideoClip::new(frames, FRAME_RATE).expect("rendered frames are valid")
}

fn render_audio(tone_indices: &[usize], tones: &[f64]) -> Waveform {
    let mut samples = Vec::with_capacity(tone_indices.len() * SAMPLES_PER_FRAME);
    let mut phase = 0.0_f64;
    for &idx in tone_indices {
        let step = 2.0 * std::f64::consts::PI * tones[idx] / SAMPLE_RATE as f64;
        for _ in 0..SAMPLES_PER_FRAME {
            samples.push((0.5 * phase.sin()) as f32);
            phase += step;
        }
        // Keep the accumulator bounded over long clips.
        phase %= 2.0 * std::f64::consts::PI;
    }
    Waveform::new(samples, SAMPLE_RATE).expect("sine stays within [-1, 1]")
}

fn split_for(index: usize, num_clips: usize) -> Split {
    if num_clips < 3 {
        return Split::Train;
    }
    let held = (0.05 * num_clips as f64).round().max(1.0) as usize;
    let train = num_clips - 2 * held;
    if index < train {
        Split::Train
    } else if index < train + held {
        Split::Val
    } else {
        Split::Test
    }
}

/// Generates the corpus under `out_dir` (`audio/`, `video/`, and a
/// manifest with paths relative to it) and returns the manifest path.
///
/// Splits are roughly 90/5/5 with at least one val and one test clip once
/// there are three or more clips; tiny corpora go entirely to train. The
/// same spec always produces byte-identical files.
pub fn make_synthetic_corpus(spec: &SyntheticSpec, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    for sub in ["audio", "video"] {
        let dir = out_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut rng = SeededRng::new(spec.seed, streams::CORPUS);
    let mut records = Vec::with_capacity(spec.num_clips);
    for clip in 0..spec.num_clips {
        let tone_indices: Vec<usize> = (0..spec.frames_per_clip)
            .map(|_| rng.below(spec.tones.len()))
            .collect();

        let id = format!("clip_{clip:04}");
        let audio_rel = PathBuf::from(format!("audio/{id}.wav"));
        let video_rel = PathBuf::from(format!("video/{id}.v2sf"));
        save_audio(
            &out_dir.join(&audio_rel),
            &render_audio(&tone_indices, &spec.tones),
        )?;
        save_video(
            &out_dir.join(&video_rel),
            &render_frames(&tone_indices, spec.tones.len()),
        )?;

        let transcript = tone_indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        records.push(ManifestRecord {
            id,
            video_path: video_rel,
            audio_path: audio_rel,
            transcript,
            speaker_id: "synthetic".into(),
            split: split_for(clip, spec.num_clips),
        });
    }

    let manifest_path = out_dir.join("manifest.ndjson");
    save_manifest(&manifest_path, &records)?;
    Ok(manifest_path)
}
