//! The outer training loop.
//!
//! [`train`] wires everything together: it loads the training split,
//! then alternates `critic_steps_per_gen_step` critic updates with one
//! generator update until the generator has taken `total_gen_steps`
//! steps. Every update appends one row to `metrics.csv` in the output
//! directory, and a checkpoint lands there whenever the generator step
//! count hits a multiple of `checkpoint_interval` (plus once at the very
//! end if the last step was not itself a checkpoint step).
//!
//! [`train_from`] is the resume path: hand it a state loaded from a
//! checkpoint and it continues exactly where that run left off — same
//! batches, same augmentations, same metrics rows.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Array4};

use crate::core::config::TrainConfig;
use crate::core::SAMPLES_PER_FRAME;
use crate::data::{augment, load_split_media, MediaRecord, Split};
use crate::error::{Error, Result};
use crate::training::checkpoint::save_checkpoint;
use crate::training::metrics::MetricsLog;
use crate::training::state::TrainState;
use crate::training::update::{critic_update, generator_update, synthesize_batch};

/// Where a finished (or checkpointed-and-stopped) run left its artifacts.
#[derive(Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub metrics_path: PathBuf,
    /// Generator steps taken by this call (not counting any resumed-from
    /// prefix).
    pub gen_steps_run: u64,
}

fn checkpoint_path(dir: &Path, gen_step: u64) -> PathBuf {
    dir.join(format!("checkpoint_{gen_step:06}.v2sc"))
}

/// Stacks the chosen clips into one training batch: augmented video
/// frames on one side, audio trimmed or zero-padded to exactly
/// `frames × 640` samples on the other. Every clip in a batch must have
/// the same frame count — the batch is one dense tensor.
pub fn assemble_batch(
    state: &mut TrainState,
    media: &[MediaRecord],
    indices: &[usize],
) -> Result<(Array4<f32>, Array2<f32>)> {
    let lead = &media[indices[0]];
    let num_frames = lead.video.num_frames();
    for &i in indices {
        let t = media[i].video.num_frames();
        if t != num_frames {
            return Err(Error::Shape(format!(
                "cannot batch clips with different frame counts: {} has {} frames, {} has {}",
                lead.record.id, num_frames, media[i].record.id, t
            )));
        }
    }
    let (_, h, w) = lead.video.frames().dim();
    let mut videos = Array4::<f32>::zeros((indices.len(), num_frames, h, w));
    let target_len = num_frames * SAMPLES_PER_FRAME;
    let mut audio = Array2::<f32>::zeros((indices.len(), target_len));
    for (row, &i) in indices.iter().enumerate() {
        let clip = augment(&media[i].video, &mut state.rngs.augment);
        videos
            .index_axis_mut(ndarray::Axis(0), row)
            .assign(clip.frames());
        let samples = media[i].audio.samples();
        let copy = samples.len().min(target_len);
        for (dst, &src) in audio
            .index_axis_mut(ndarray::Axis(0), row)
            .iter_mut()
            .zip(&samples[..copy])
        {
            *dst = src;
        }
    }
    Ok((videos, audio))
}

pub fn train(config: TrainConfig, manifest_path: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    train_from(TrainState::new(config)?, manifest_path, out_dir)
}

pub fn train_from(
    mut state: TrainState,
    manifest_path: &Path,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let media = load_split_media(manifest_path, Split::Train)?;
    if media.is_empty() {
        return Err(Error::Config(format!(
            "manifest {} has no clips in the train split",
            manifest_path.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.to_path_buf(), e))?;
    let mut metrics = MetricsLog::append_to(&out_dir.join("metrics.csv"))?;
    let batch_size = state.config.batch_size;
    let start_step = state.gen_step;
    let mut last_saved = None;
    while state.gen_step < state.config.total_gen_steps {
        for _ in 0..state.config.critic_steps_per_gen_step {
            let indices = state.next_batch_indices(media.len(), batch_size);
            let (videos, real) = assemble_batch(&mut state, &media, &indices)?;
            let clock = Instant::now();
            // Fresh fakes for every critic step: the generator re-renders
            // this batch rather than reusing stale waveforms.
            let fake = synthesize_batch(&mut state.generator, &videos);
            let m = critic_update(&mut state, &real, &fake)?;
            metrics.log_critic(state.critic_step, &m, clock.elapsed().as_secs_f64() * 1e3)?;
        }
        let indices = state.next_batch_indices(media.len(), batch_size);
        let (videos, real) = assemble_batch(&mut state, &media, &indices)?;
        let clock = Instant::now();
        let m = generator_update(&mut state, &videos, &real)?;
        metrics.log_gen(state.gen_step, &m, clock.elapsed().as_secs_f64() * 1e3)?;
        if state.gen_step % state.config.checkpoint_interval == 0 {
            let path = checkpoint_path(out_dir, state.gen_step);
            save_checkpoint(&mut state, &path)?;
            last_saved = Some(state.gen_step);
        }
    }
    if last_saved != Some(state.gen_step) {
        let path = checkpoint_path(out_dir, state.gen_step);
        save_checkpoint(&mut state, &path)?;
    }
    Ok(TrainOutcome {
        final_checkpoint: checkpoint_path(out_dir, state.gen_step),
        metrics_path: metrics.path().to_path_buf(),
        gen_steps_run: state.gen_step - start_step,
    })
}
