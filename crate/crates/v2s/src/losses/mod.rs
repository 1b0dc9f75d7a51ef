//! Training objectives.
//!
//! Three families live here:
//!
//! - **Adversarial** ([`adversarial`]): the critic objective, the generator's
//!   adversarial term, and the gradient penalty that keeps both critics
//!   approximately 1-Lipschitz. The penalty's value path and its
//!   parameter-gradient path (the tangent machinery from [`crate::model`])
//!   are both orchestrated here.
//! - **Reconstruction** ([`perceptual`], [`spectral`]): mean-reduced L1
//!   distances between the real and synthesized waveforms measured in three
//!   feature spaces — learned perceptual features, log-power spectra, and
//!   MFCCs. Each comes with an exact gradient with respect to the
//!   synthesized samples so the generator can train on full utterances.
//! - **The total** ([`total`]): the weighted four-term generator objective
//!   with per-term ablation switches.
//!
//! All L1 distances are mean-reduced rather than summed, so their magnitudes
//! do not grow with clip length and the default term weights stay meaningful
//! across utterance durations.

mod adversarial;
mod perceptual;
mod spectral;
mod total;

pub use adversarial::{
    critic_loss, critic_loss_from_scores, generator_adversarial_loss, interpolate_specs,
    interpolate_waves, neg_mean_score, penalty_from_grad_norms, power_gradient_penalty,
    power_penalty_with_param_grads, wave_gradient_penalty, wave_penalty_with_param_grads,
    InterpolatedSpecs, InterpolatedWaves, PenaltyOutcome,
};
pub use perceptual::{
    fallback_extractor, pase_loss, pase_loss_with_grad, FallbackExtractor, PerceptualExtractor,
};
pub use spectral::{mfcc_loss, mfcc_loss_with_grad, power_loss, power_loss_with_grad};
pub use total::{total_generator_loss, LossParts, LossToggles};
