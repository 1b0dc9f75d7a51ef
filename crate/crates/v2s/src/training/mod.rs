//! Adversarial training: state, update rules, metrics, checkpoints, and
//! the outer loop.
//!
//! The pieces compose in one direction. [`TrainState`] owns everything a
//! run needs (networks, optimizers, rng streams, counters).
//! [`critic_update`] and [`generator_update`] each advance the state by
//! exactly one optimizer step. [`train`] alternates them on batches from
//! a manifest, appending rows to a metrics CSV and snapshotting the full
//! state with [`save_checkpoint`] so a killed run resumes bit-exactly
//! via [`load_checkpoint`] and [`train_from`].

mod checkpoint;
mod metrics;
mod run;
mod state;
mod update;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use metrics::{strip_wall_ms, MetricsLog, METRICS_HEADER};
pub use run::{assemble_batch, train, train_from, TrainOutcome};
pub use state::{
    epoch_order, window_samples, BatchCursor, TrainRngs, TrainState, LOSS_HISTORY_CAPACITY,
};
pub use update::{critic_update, generator_update, synthesize_batch, CriticMetrics, GenMetrics};
