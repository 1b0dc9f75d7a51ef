//! The weighted four-term generator objective and its ablation switches.

use crate::core::config::TrainConfig;
use crate::core::LossWeights;

/// Raw (unweighted) values of the four generator loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub adversarial: f64,
    pub perceptual: f64,
    pub power: f64,
    pub mfcc: f64,
}

/// Which terms participate in the total; a disabled term contributes
/// exactly zero, not a small weighted value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossToggles {
    pub adversarial: bool,
    pub perceptual: bool,
    pub power: bool,
    pub mfcc: bool,
}

impl LossToggles {
    pub fn all_on() -> Self {
        LossToggles { adversarial: true, perceptual: true, power: true, mfcc: true }
    }

    /// The adversarial term is live while at least one critic is enabled.
    pub fn from_config(config: &TrainConfig) -> Self {
        LossToggles {
            adversarial: config.enable_wave_critic || config.enable_power_critic,
            perceptual: config.enable_pase_loss,
            power: config.enable_power_loss,
            mfcc: config.enable_mfcc_loss,
        }
    }
}

/// `α₁·adv + α₂·perceptual + α₃·power + α₄·mfcc`, skipping disabled terms
/// entirely.
pub fn total_generator_loss(
    weights: &LossWeights,
    parts: &LossParts,
    toggles: &LossToggles,
) -> f64 {
    let mut total = 0.0;
    if toggles.adversarial {
        total += weights.alpha_adv * parts.adversarial;
    }
    if toggles.perceptual {
        total += weights.alpha_pase * parts.perceptual;
    }
    if toggles.power {
        total += weights.alpha_power * parts.power;
    }
    if toggles.mfcc {
        total += weights.alpha_mfcc * parts.mfcc;
    }
    total
}
