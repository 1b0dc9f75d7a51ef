//! Everything a training run carries between steps.

use crate::core::config::{validate_config, TrainConfig};
use crate::core::rng::streams;
use crate::core::{SeededRng, SAMPLE_RATE};
use crate::dsp::{StftParams, StftPlan};
use crate::error::{Error, Result};
use crate::losses::{fallback_extractor, FallbackExtractor};
use crate::model::{GeneratorNet, PowerCriticNet, WaveCriticNet};
use crate::nn::Adam;

/// How many recent generator totals the loss history retains.
pub const LOSS_HISTORY_CAPACITY: usize = 128;

/// Live random sources owned by a run. Initialization draws are not here —
/// they happen once inside [`TrainState::new`] and are never resumed.
pub struct TrainRngs {
    pub augment: SeededRng,
    pub clip_window: SeededRng,
    pub gp_wave: SeededRng,
    pub gp_power: SeededRng,
}

impl TrainRngs {
    fn new(seed: u64) -> Self {
        TrainRngs {
            augment: SeededRng::new(seed, streams::AUGMENT),
            clip_window: SeededRng::new(seed, streams::CLIP_WINDOW),
            gp_wave: SeededRng::new(seed, streams::GP_EPSILON_WAVE),
            gp_power: SeededRng::new(seed, streams::GP_EPSILON_POWER),
        }
    }
}

/// Position in the shuffled pass over the train split.
///
/// The ordering for epoch `e` is a pure function of `(seed, e)` (see
/// [`epoch_order`]), so these two integers are the entire data-progress
/// state a checkpoint needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchCursor {
    pub epoch: u64,
    pub position: usize,
}

/// The shuffled item order for one epoch.
pub fn epoch_order(seed: u64, epoch: u64, num_items: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..num_items).collect();
    let mixed = seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    SeededRng::new(mixed, streams::DATA_ORDER).shuffle(&mut order);
    order
}

/// The complete mutable state of one training run: the three networks,
/// their optimizers, the frozen perceptual extractor, schedule counters,
/// live rng streams, and a ring buffer of recent generator totals.
pub struct TrainState {
    pub config: TrainConfig,
    pub generator: GeneratorNet,
    pub wave_critic: WaveCriticNet,
    pub power_critic: PowerCriticNet,
    pub gen_opt: Adam,
    pub wave_opt: Adam,
    pub power_opt: Adam,
    /// Frozen; rebuilt from the config seed rather than checkpointed.
    pub extractor: FallbackExtractor,
    pub gen_step: u64,
    pub critic_step: u64,
    pub cursor: BatchCursor,
    pub rngs: TrainRngs,
    /// Most recent generator totals, oldest first, capped at
    /// [`LOSS_HISTORY_CAPACITY`].
    pub loss_history: Vec<f64>,
    /// Plan for the power-critic spectrograms of one clip window.
    pub stft: StftPlan,
}

impl TrainState {
    /// Builds a fresh run: seeded initialization for all three networks and
    /// critics sized to the configured clip window.
    pub fn new(config: TrainConfig) -> Result<Self> {
        let violations = validate_config(&config);
        if !violations.is_empty() {
            return Err(Error::Config(violations.join("; ")));
        }

        let window = window_samples(&config);
        let stft = StftPlan::new(StftParams::default(), SAMPLE_RATE)?;
        let spec_frames = stft.num_frames(window)?;

        let ws = config.model_width_scale;
        let generator =
            GeneratorNet::new(ws, &mut SeededRng::new(config.seed, streams::INIT_GENERATOR));
        let wave_critic = WaveCriticNet::new(
            ws,
            window,
            &mut SeededRng::new(config.seed, streams::INIT_WAVE_CRITIC),
        );
        let power_critic = PowerCriticNet::new(
            ws,
            stft.num_bins(),
            spec_frames,
            &mut SeededRng::new(config.seed, streams::INIT_POWER_CRITIC),
        );

        let adam = || Adam::new(config.learning_rate, config.adam_beta1, config.adam_beta2);
        Ok(TrainState {
            extractor: fallback_extractor(config.seed),
            generator,
            wave_critic,
            power_critic,
            gen_opt: adam(),
            wave_opt: adam(),
            power_opt: adam(),
            gen_step: 0,
            critic_step: 0,
            cursor: BatchCursor {
                epoch: 0,
                position: 0,
            },
            rngs: TrainRngs::new(config.seed),
            loss_history: Vec::new(),
            stft,
            config,
        })
    }

    /// Appends a generator total, dropping the oldest beyond capacity.
    pub fn push_loss(&mut self, total: f64) {
        if self.loss_history.len() == LOSS_HISTORY_CAPACITY {
            self.loss_history.remove(0);
        }
        self.loss_history.push(total);
    }

    /// Draws the next `batch_size` item indices from the shuffled pass,
    /// rolling over into a freshly shuffled epoch whenever the current one
    /// runs out (a batch may straddle the boundary, keeping its size fixed).
    pub fn next_batch_indices(&mut self, num_items: usize, batch_size: usize) -> Vec<usize> {
        assert!(num_items > 0, "cannot batch an empty item set");
        let mut order = epoch_order(self.config.seed, self.cursor.epoch, num_items);
        let mut picked = Vec::with_capacity(batch_size);
        while picked.len() < batch_size {
            if self.cursor.position >= num_items {
                self.cursor.epoch += 1;
                self.cursor.position = 0;
                order = epoch_order(self.config.seed, self.cursor.epoch, num_items);
            }
            picked.push(order[self.cursor.position]);
            self.cursor.position += 1;
        }
        picked
    }
}

impl std::fmt::Debug for TrainState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainState")
            .field("gen_step", &self.gen_step)
            .field("critic_step", &self.critic_step)
            .field("cursor", &self.cursor)
            .finish_non_exhaustive()
    }
}

/// Samples in one adversarial clip window.
pub fn window_samples(config: &TrainConfig) -> usize {
    (config.clip_seconds * SAMPLE_RATE as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            model_width_scale: 0.125,
            clip_seconds: 0.08,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fresh_state_starts_at_step_zero() {
        let state = TrainState::new(tiny_config()).unwrap();
        assert_eq!(state.gen_step, 0);
        assert_eq!(state.critic_step, 0);
        assert_eq!(state.cursor, BatchCursor { epoch: 0, position: 0 });
        assert!(state.loss_history.is_empty());
    }

    #[test]
    fn critics_are_sized_to_the_clip_window() {
        let state = TrainState::new(tiny_config()).unwrap();
        assert_eq!(state.wave_critic.expected_len(), 1280);
        // 1280 samples, 400-sample window, 160 hop → 6 analysis frames.
        assert_eq!(state.power_critic.expected_shape(), (257, 6));

        let second = TrainState::new(TrainConfig {
            clip_seconds: 1.0,
            ..tiny_config()
        })
        .unwrap();
        assert_eq!(second.wave_critic.expected_len(), 16_000);
        assert_eq!(second.power_critic.expected_shape(), (257, 98));
    }

    #[test]
    fn invalid_config_is_rejected_with_all_violations() {
        let config = TrainConfig {
            learning_rate: 0.0,
            batch_size: 0,
            ..tiny_config()
        };
        let err = TrainState::new(config).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("learning_rate") && msg.contains("batch_size"), "{msg}");
    }

    #[test]
    fn epoch_order_is_a_permutation_and_seed_sensitive() {
        let a = epoch_order(1, 0, 10);
        let b = epoch_order(1, 0, 10);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_ne!(epoch_order(2, 0, 10), a);
        assert_ne!(epoch_order(1, 1, 10), a);
    }

    #[test]
    fn batches_straddle_epoch_boundaries_without_shrinking() {
        let mut state = TrainState::new(tiny_config()).unwrap();
        // 5 items, batch 2 → batches of indices: 2+2, then 1 left + 1 from
        // the next epoch.
        let b1 = state.next_batch_indices(5, 2);
        let b2 = state.next_batch_indices(5, 2);
        let b3 = state.next_batch_indices(5, 2);
        assert_eq!(b1.len(), 2);
        assert_eq!(b2.len(), 2);
        assert_eq!(b3.len(), 2);
        assert_eq!(state.cursor, BatchCursor { epoch: 1, position: 1 });
        // First five draws cover epoch 0's permutation exactly.
        let mut seen: Vec<usize> = b1.into_iter().chain(b2).chain(b3.iter().copied().take(1)).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn loss_history_is_bounded() {
        let mut state = TrainState::new(tiny_config()).unwrap();
        for i in 0..(LOSS_HISTORY_CAPACITY + 10) {
            state.push_loss(i as f64);
        }
        assert_eq!(state.loss_history.len(), LOSS_HISTORY_CAPACITY);
        assert_eq!(state.loss_history[0], 10.0);
        assert_eq!(*state.loss_history.last().unwrap(), (LOSS_HISTORY_CAPACITY + 9) as f64);
    }
}
