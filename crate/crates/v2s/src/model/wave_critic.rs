//! The waveform critic: seven strided 1D convolutions with Leaky ReLU, then
//! a 1×1 scoring convolution averaged over time.
//!
//! There is deliberately no normalization of any kind here — the critic is
//! trained with a gradient penalty on its input gradient, and normalization
//! layers couple batch elements in ways that corrupt that penalty. The
//! middle layers use grouped kernels (one group per four input channels,
//! clamped to divide both channel counts) to keep the wide layers affordable.
//!
//! Besides the usual forward/backward passes, the critic exposes the tangent
//! pair used for the gradient penalty's parameter gradient; see the module
//! docs in [`crate::model`].

use ndarray::{Array1, Array2, Array3, ArrayD, Axis};

use super::{lrelu3, masked3, scaled_width};
use crate::core::rng::SeededRng;
use crate::error::{Error, Result};
use crate::nn::{clamp_groups, join, Conv1d, ParamVisitor, Params};

const LEAKY_SLOPE: f32 = 0.2;
const NUM_LAYERS: usize = 7;

pub struct WaveCriticNet {
    convs: Vec<Conv1d>,
    head: Conv1d,
    expected_len: usize,
}

/// Primal activations and activation masks from [`WaveCriticNet::forward`].
///
/// `inputs[l]` is the tensor fed to convolution `l` (index 7 is the head
/// input); `masks[l]` is the Leaky ReLU slope pattern after convolution `l`.
pub struct WaveCriticCache {
    inputs: Vec<Array3<f32>>,
    masks: Vec<ArrayD<f32>>,
    head_out_len: usize,
}

/// Tangent activations from [`WaveCriticNet::tangent_forward`]: the inputs
/// each convolution saw while propagating a direction through the frozen
/// linear piece.
pub struct WaveTangentCache {
    inputs: Vec<Array3<f32>>,
}

impl WaveCriticNet {
    /// `expected_len` is the exact number of samples per scored clip
    /// (`clip_seconds · sample_rate` in training).
    pub fn new(width_scale: f64, expected_len: usize, rng: &mut SeededRng) -> Self {
        let w = |c| scaled_width(c, width_scale);
        let widths = [1, w(16), w(64), w(256), w(1024), w(1024), w(1024), w(1024)];
        let geometry: [(usize, usize, usize); NUM_LAYERS] = [
            (15, 1, 7),
            (41, 4, 20),
            (41, 4, 20),
            (41, 4, 20),
            (41, 4, 20),
            (5, 1, 2),
            (3, 1, 1),
        ];
        let convs = geometry
            .iter()
            .enumerate()
            .map(|(l, &(k, s, p))| {
                let (in_ch, out_ch) = (widths[l], widths[l + 1]);
                // Grouping only on the strided middle layers, as in the
                // MelGAN-family discriminators this follows.
                let groups = if s == 4 { clamp_groups(in_ch / 4, in_ch, out_ch) } else { 1 };
                Conv1d::new(in_ch, out_ch, k, s, p, groups, true, rng)
            })
            .collect();
        WaveCriticNet {
            convs,
            head: Conv1d::new(widths[NUM_LAYERS], 1, 1, 1, 0, 1, true, rng),
            expected_len,
        }
    }

    pub fn expected_len(&self) -> usize {
        self.expected_len
    }

    /// Scores a batch of clips `(B, expected_len)` without keeping caches.
    pub fn score(&self, clips: &Array2<f32>) -> Result<Array1<f32>> {
        Ok(self.forward(clips)?.0)
    }

    /// Scores a batch and retains what the backward and tangent passes need.
    pub fn forward(&self, clips: &Array2<f32>) -> Result<(Array1<f32>, WaveCriticCache)> {
        let (batch, len) = clips.dim();
        if len != self.expected_len {
            return Err(Error::Shape(format!(
                "waveform clip has {len} samples, critic expects {}",
                self.expected_len
            )));
        }
        if batch == 0 {
            return Err(Error::Shape("empty clip batch".into()));
        }
        let mut h = clips.clone().insert_axis(Axis(1));
        let mut inputs = Vec::with_capacity(NUM_LAYERS + 1);
        let mut masks = Vec::with_capacity(NUM_LAYERS);
        for conv in &self.convs {
            let y = conv.forward(&h);
            inputs.push(h);
            let (a, m) = lrelu3(&y, LEAKY_SLOPE);
            masks.push(m);
            h = a;
        }
        let head_y = self.head.forward(&h);
        inputs.push(h);
        let head_out_len = head_y.dim().2;
        let scores = head_y
            .index_axis(Axis(1), 0)
            .mean_axis(Axis(1))
            .expect("nonzero output length");
        Ok((scores, WaveCriticCache { inputs, masks, head_out_len }))
    }

    /// Gradient of `Σ_b seed[b]·score_b` with respect to the input clips.
    pub fn input_grads(&self, cache: &WaveCriticCache, seed: &Array1<f32>) -> Array2<f32> {
        let mut g = self.seed_to_head_grad(cache, seed);
        g = self.head.backward_input(&g, cache.inputs[NUM_LAYERS].dim().2);
        for l in (0..NUM_LAYERS).rev() {
            g = masked3(&g, &cache.masks[l]);
            g = self.convs[l].backward_input(&g, cache.inputs[l].dim().2);
        }
        g.remove_axis(Axis(1))
    }

    /// Standard backward for `Σ_b seed[b]·score_b`: accumulates weight and
    /// bias gradients on every layer.
    pub fn accumulate_param_grads(&mut self, cache: &WaveCriticCache, seed: &Array1<f32>) {
        let (inputs, masks) = (&cache.inputs, &cache.masks);
        let mut g = self.seed_to_head_grad(cache, seed);
        self.head.accumulate_param_grads(&inputs[NUM_LAYERS], &g);
        g = self.head.backward_input(&g, inputs[NUM_LAYERS].dim().2);
        for l in (0..NUM_LAYERS).rev() {
            g = masked3(&g, &masks[l]);
            self.convs[l].accumulate_param_grads(&inputs[l], &g);
            if l > 0 {
                g = self.convs[l].backward_input(&g, inputs[l].dim().2);
            }
        }
    }

    /// Pushes a direction `v` through the critic's frozen linear piece,
    /// returning the directional derivative of each score.
    ///
    /// Feeding back the critic's own input gradient must reproduce its
    /// squared norm — an identity the tests pin down — because the pass
    /// computes `⟨∇_x score, v⟩` exactly on the piece the primal forward
    /// selected.
    pub fn tangent_forward(
        &self,
        cache: &WaveCriticCache,
        v: &Array2<f32>,
    ) -> (Array1<f32>, WaveTangentCache) {
        let mut u = v.clone().insert_axis(Axis(1));
        let mut inputs = Vec::with_capacity(NUM_LAYERS + 1);
        for (l, conv) in self.convs.iter().enumerate() {
            let y = conv.forward_nobias(&u);
            inputs.push(u);
            u = masked3(&y, &cache.masks[l]);
        }
        let head_u = self.head.forward_nobias(&u);
        inputs.push(u);
        let t = head_u
            .index_axis(Axis(1), 0)
            .mean_axis(Axis(1))
            .expect("nonzero output length");
        (t, WaveTangentCache { inputs })
    }

    /// Backward over the tangent graph: accumulates `Σ_b seed[b]·∂t_b/∂W`
    /// into the weight gradients. Biases receive nothing — the input
    /// gradient of a piecewise-linear critic does not depend on them.
    pub fn tangent_accumulate_weight_grads(
        &mut self,
        cache: &WaveCriticCache,
        tangent: &WaveTangentCache,
        seed: &Array1<f32>,
    ) {
        let inputs = &tangent.inputs;
        let mut g = self.seed_to_head_grad(cache, seed);
        self.head.accumulate_weight_grads_only(&inputs[NUM_LAYERS], &g);
        g = self.head.backward_input(&g, inputs[NUM_LAYERS].dim().2);
        for l in (0..NUM_LAYERS).rev() {
            g = masked3(&g, &cache.masks[l]);
            self.convs[l].accumulate_weight_grads_only(&inputs[l], &g);
            if l > 0 {
                g = self.convs[l].backward_input(&g, inputs[l].dim().2);
            }
        }
    }

    /// The time-mean head distributes `seed[b]` evenly over its positions.
    fn seed_to_head_grad(&self, cache: &WaveCriticCache, seed: &Array1<f32>) -> Array3<f32> {
        let share = 1.0 / cache.head_out_len as f32;
        Array3::from_shape_fn((seed.len(), 1, cache.head_out_len), |(b, _, _)| seed[b] * share)
    }
}

impl Params for WaveCriticNet {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        for (i, conv) in self.convs.iter_mut().enumerate() {
            conv.visit_params(&join(prefix, &format!("conv{}", i + 1)), f);
        }
        self.head.visit_params(&join(prefix, "head"), f);
    }
}
