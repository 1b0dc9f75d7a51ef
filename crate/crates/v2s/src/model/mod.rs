//! The three trainable networks: the video-to-waveform generator and the two
//! critics that score its output during adversarial training.
//!
//! All channel widths are scaled by a single `width_scale` factor so the same
//! topology runs both at full size and at desk scale. Networks carry their own
//! gradient buffers (see [`crate::nn::Params`]); forward passes return the
//! caches their backward passes need, so inference borrows immutably and
//! training mutates only through the explicit gradient-accumulation calls.
//!
//! The critics additionally expose a *tangent* pass pair
//! (`tangent_forward` / `tangent_accumulate_weight_grads`). Both critics are
//! piecewise-linear in their input — convolutions, leaky/plain ReLU, max and
//! average pooling, a linear head, and deliberately no normalization layers —
//! so the directional derivative of the score along any direction is computed
//! exactly by re-running the convolutions without biases while freezing the
//! activation masks and argmax choices from the primal pass. Backpropagating
//! through that frozen tangent graph yields the parameter gradient of the
//! gradient-penalty term without a general second-derivative engine.

mod generator;
mod power_critic;
mod wave_critic;

pub use generator::{GenCache, GeneratorNet};
pub use power_critic::{PowerCriticCache, PowerCriticNet, PowerTangentCache};
pub use wave_critic::{WaveCriticCache, WaveCriticNet, WaveTangentCache};

use ndarray::{Array3, Array4, ArrayD};

/// Applies the global width multiplier to a base channel count, never
/// shrinking below one channel.
pub fn scaled_width(base: usize, width_scale: f64) -> usize {
    ((base as f64 * width_scale).round() as usize).max(1)
}

// Rank-preserving wrappers around the dynamic-rank activation helpers, so the
// network code stays in concrete Array3/Array4 types.

pub(crate) fn relu3(x: &Array3<f32>) -> (Array3<f32>, ArrayD<f32>) {
    let (y, m) = crate::nn::relu(&x.view().into_dyn());
    (y.into_dimensionality().expect("rank preserved"), m)
}

pub(crate) fn relu4(x: &Array4<f32>) -> (Array4<f32>, ArrayD<f32>) {
    let (y, m) = crate::nn::relu(&x.view().into_dyn());
    (y.into_dimensionality().expect("rank preserved"), m)
}

pub(crate) fn lrelu3(x: &Array3<f32>, slope: f32) -> (Array3<f32>, ArrayD<f32>) {
    let (y, m) = crate::nn::leaky_relu(&x.view().into_dyn(), slope);
    (y.into_dimensionality().expect("rank preserved"), m)
}

pub(crate) fn masked3(g: &Array3<f32>, mask: &ArrayD<f32>) -> Array3<f32> {
    crate::nn::apply_mask(&g.view().into_dyn(), mask)
        .into_dimensionality()
        .expect("rank preserved")
}

pub(crate) fn masked4(g: &Array4<f32>, mask: &ArrayD<f32>) -> Array4<f32> {
    crate::nn::apply_mask(&g.view().into_dyn(), mask)
        .into_dimensionality()
        .expect("rank preserved")
}
