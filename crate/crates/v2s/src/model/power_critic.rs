//! The spectrogram critic: a ResNet-18 trunk matching the generator's video
//! encoder, but two-dimensional over (frequency, time), stripped of every
//! normalization layer, and ending in a scalar scoring head.
//!
//! Input is a normalized log-power spectrogram (one channel). As with the
//! waveform critic, the absence of normalization keeps the network piecewise
//! linear, which the gradient-penalty tangent machinery relies on; see the
//! module docs in [`crate::model`].

use ndarray::{Array1, Array2, Array3, Array4, ArrayD, Axis};

use super::{masked4, relu4, scaled_width};
use crate::core::rng::SeededRng;
use crate::error::{Error, Result};
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, join, Conv2d, Linear, MaxPool2d, MaxPoolCache,
    ParamVisitor, Params,
};

/// Residual unit without normalization: conv–ReLU–conv plus a (possibly
/// projected) skip, ReLU after the add.
struct BlockNb {
    conv1: Conv2d,
    conv2: Conv2d,
    proj: Option<Conv2d>,
}

struct BlockNbCache {
    x: Array4<f32>,
    mask1: ArrayD<f32>,
    mid: Array4<f32>,
    mask2: ArrayD<f32>,
}

impl BlockNb {
    fn new(in_ch: usize, out_ch: usize, stride: usize, rng: &mut SeededRng) -> Self {
        BlockNb {
            conv1: Conv2d::new(in_ch, out_ch, 3, stride, 1, true, rng),
            conv2: Conv2d::new(out_ch, out_ch, 3, 1, 1, true, rng),
            proj: (stride != 1 || in_ch != out_ch)
                .then(|| Conv2d::new(in_ch, out_ch, 1, stride, 0, true, rng)),
        }
    }

    fn forward(&self, x: Array4<f32>) -> (Array4<f32>, BlockNbCache) {
        let (mid, mask1) = relu4(&self.conv1.forward(&x));
        let mut pre = self.conv2.forward(&mid);
        match &self.proj {
            Some(pc) => pre += &pc.forward(&x),
            None => pre += &x,
        }
        let (out, mask2) = relu4(&pre);
        (out, BlockNbCache { x, mask1, mid, mask2 })
    }

    /// Input gradient only; parameters untouched.
    fn backward_input(&self, cache: &BlockNbCache, gy: &Array4<f32>) -> Array4<f32> {
        let (_, _, h, w) = cache.x.dim();
        let g_pre = masked4(gy, &cache.mask2);
        let mut gx = match &self.proj {
            Some(pc) => pc.backward_input(&g_pre, h, w),
            None => g_pre.clone(),
        };
        let g_mid = self.conv2.backward_input(&g_pre, cache.mid.dim().2, cache.mid.dim().3);
        let g1 = masked4(&g_mid, &cache.mask1);
        gx += &self.conv1.backward_input(&g1, h, w);
        gx
    }

    /// Shared spine of the primal and tangent parameter backward passes:
    /// the masks always come from the primal cache, while the activations
    /// multiplied into the weight gradients come from whichever graph is
    /// being differentiated (`x`/`mid` sources differ), and the tangent
    /// variant skips biases.
    fn param_walk(
        &mut self,
        cache: &BlockNbCache,
        x_src: &Array4<f32>,
        mid_src: &Array4<f32>,
        gy: &Array4<f32>,
        weights_only: bool,
    ) -> Array4<f32> {
        let (_, _, h, w) = x_src.dim();
        let g_pre = masked4(gy, &cache.mask2);
        let mut gx = match &mut self.proj {
            Some(pc) => {
                if weights_only {
                    pc.accumulate_weight_grads_only(x_src, &g_pre);
                } else {
                    pc.accumulate_param_grads(x_src, &g_pre);
                }
                pc.backward_input(&g_pre, h, w)
            }
            None => g_pre.clone(),
        };
        if weights_only {
            self.conv2.accumulate_weight_grads_only(mid_src, &g_pre);
        } else {
            self.conv2.accumulate_param_grads(mid_src, &g_pre);
        }
        let g_mid = self.conv2.backward_input(&g_pre, mid_src.dim().2, mid_src.dim().3);
        let g1 = masked4(&g_mid, &cache.mask1);
        if weights_only {
            self.conv1.accumulate_weight_grads_only(x_src, &g1);
        } else {
            self.conv1.accumulate_param_grads(x_src, &g1);
        }
        gx += &self.conv1.backward_input(&g1, h, w);
        gx
    }

    fn tangent_forward(&self, cache: &BlockNbCache, u: Array4<f32>) -> (Array4<f32>, (Array4<f32>, Array4<f32>)) {
        let u_mid = masked4(&self.conv1.forward_nobias(&u), &cache.mask1);
        let mut u_pre = self.conv2.forward_nobias(&u_mid);
        match &self.proj {
            Some(pc) => u_pre += &pc.forward_nobias(&u),
            None => u_pre += &u,
        }
        let out = masked4(&u_pre, &cache.mask2);
        (out, (u, u_mid))
    }
}

impl Params for BlockNb {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.conv1.visit_params(&join(prefix, "conv1"), f);
        self.conv2.visit_params(&join(prefix, "conv2"), f);
        if let Some(pc) = &mut self.proj {
            pc.visit_params(&join(prefix, "proj"), f);
        }
    }
}

pub struct PowerCriticNet {
    stem: Conv2d,
    pool: MaxPool2d,
    blocks: Vec<BlockNb>,
    head: Linear,
    expected: (usize, usize),
}

/// Primal activations from [`PowerCriticNet::forward`].
pub struct PowerCriticCache {
    x0: Array4<f32>,
    stem_mask: ArrayD<f32>,
    pool_cache: MaxPoolCache,
    block_caches: Vec<BlockNbCache>,
    trunk_hw: (usize, usize),
    head_in: Array2<f32>,
}

/// Tangent activations from [`PowerCriticNet::tangent_forward`].
pub struct PowerTangentCache {
    u0: Array4<f32>,
    block_srcs: Vec<(Array4<f32>, Array4<f32>)>,
    head_u: Array2<f32>,
}

impl PowerCriticNet {
    /// `bins`/`frames` fix the accepted spectrogram shape (the training
    /// pipeline uses 257×98 for one-second clips).
    pub fn new(width_scale: f64, bins: usize, frames: usize, rng: &mut SeededRng) -> Self {
        let w = |c| scaled_width(c, width_scale);
        let (c1, c2, c3, c4) = (w(64), w(128), w(256), w(512));
        let stem = Conv2d::new(1, c1, 7, 2, 3, true, rng);
        let pool = MaxPool2d::new(3, 2, 1);
        // Dry-run the spatial chain so a too-small input fails at
        // construction, not mid-training.
        let (mut h, mut l) = stem.out_size(bins, frames);
        (h, l) = pool.out_size(h, l);
        for stride in [1usize, 2, 2, 2] {
            h = (h + 2 - 3) / stride + 1;
            l = (l + 2 - 3) / stride + 1;
            assert!(h >= 1 && l >= 1, "spectrogram {bins}×{frames} too small for the trunk");
        }
        let mut blocks = Vec::with_capacity(8);
        for (in_ch, out_ch, stride) in
            [(c1, c1, 1), (c1, c2, 2), (c2, c3, 2), (c3, c4, 2)]
        {
            blocks.push(BlockNb::new(in_ch, out_ch, stride, rng));
            blocks.push(BlockNb::new(out_ch, out_ch, 1, rng));
        }
        PowerCriticNet { stem, pool, blocks, head: Linear::new(c4, 1, rng), expected: (bins, frames) }
    }

    pub fn expected_shape(&self) -> (usize, usize) {
        self.expected
    }

    /// Scores a batch of normalized spectrograms `(B, F, L)` without caches.
    pub fn score(&self, specs: &Array3<f32>) -> Result<Array1<f32>> {
        Ok(self.forward(specs)?.0)
    }

    pub fn forward(&self, specs: &Array3<f32>) -> Result<(Array1<f32>, PowerCriticCache)> {
        let (batch, bins, frames) = specs.dim();
        if (bins, frames) != self.expected {
            return Err(Error::Shape(format!(
                "spectrogram is {bins}×{frames}, critic expects {}×{}",
                self.expected.0, self.expected.1
            )));
        }
        if batch == 0 {
            return Err(Error::Shape("empty spectrogram batch".into()));
        }
        let x0 = specs.clone().insert_axis(Axis(1));
        let (stem_act, stem_mask) = relu4(&self.stem.forward(&x0));
        let (mut trunk, pool_cache) = self.pool.forward(&stem_act);
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (out, cache) = block.forward(trunk);
            trunk = out;
            block_caches.push(cache);
        }
        let trunk_hw = (trunk.dim().2, trunk.dim().3);
        let head_in = global_avg_pool(&trunk);
        let scores = self.head.forward(&head_in).remove_axis(Axis(1));
        Ok((scores, PowerCriticCache { x0, stem_mask, pool_cache, block_caches, trunk_hw, head_in }))
    }

    /// Gradient of `Σ_b seed[b]·score_b` with respect to the input
    /// spectrograms, shaped `(B, F, L)`.
    pub fn input_grads(&self, cache: &PowerCriticCache, seed: &Array1<f32>) -> Array3<f32> {
        let g_scores = seed.clone().insert_axis(Axis(1));
        let g_pool = self.head.backward_input(&g_scores);
        let mut g = global_avg_pool_backward(&g_pool, cache.trunk_hw.0, cache.trunk_hw.1);
        for (block, bc) in self.blocks.iter().zip(&cache.block_caches).rev() {
            g = block.backward_input(bc, &g);
        }
        let g_stem = masked4(&self.pool.backward(&cache.pool_cache, &g), &cache.stem_mask);
        self.stem
            .backward_input(&g_stem, cache.x0.dim().2, cache.x0.dim().3)
            .remove_axis(Axis(1))
    }

    /// Standard backward for `Σ_b seed[b]·score_b`, accumulating all
    /// parameter gradients.
    pub fn accumulate_param_grads(&mut self, cache: &PowerCriticCache, seed: &Array1<f32>) {
        let g_scores = seed.clone().insert_axis(Axis(1));
        self.head.accumulate_param_grads(&cache.head_in, &g_scores);
        let g_pool = self.head.backward_input(&g_scores);
        let mut g = global_avg_pool_backward(&g_pool, cache.trunk_hw.0, cache.trunk_hw.1);
        for (block, bc) in self.blocks.iter_mut().zip(&cache.block_caches).rev() {
            g = block.param_walk(bc, &bc.x, &bc.mid, &g, false);
        }
        let g_stem = masked4(&self.pool.backward(&cache.pool_cache, &g), &cache.stem_mask);
        self.stem.accumulate_param_grads(&cache.x0, &g_stem);
    }

    /// Pushes a direction through the frozen linear piece selected by the
    /// primal pass; returns each clip's directional derivative.
    pub fn tangent_forward(
        &self,
        cache: &PowerCriticCache,
        v: &Array3<f32>,
    ) -> (Array1<f32>, PowerTangentCache) {
        let u0 = v.clone().insert_axis(Axis(1));
        let u_stem = masked4(&self.stem.forward_nobias(&u0), &cache.stem_mask);
        let mut u = self.pool.tangent(&cache.pool_cache, &u_stem);
        let mut block_srcs = Vec::with_capacity(self.blocks.len());
        for (block, bc) in self.blocks.iter().zip(&cache.block_caches) {
            let (out, srcs) = block.tangent_forward(bc, u);
            u = out;
            block_srcs.push(srcs);
        }
        let head_u = global_avg_pool(&u);
        let t = self.head.forward_nobias(&head_u).remove_axis(Axis(1));
        (t, PowerTangentCache { u0, block_srcs, head_u })
    }

    /// Backward over the tangent graph; weight gradients only.
    pub fn tangent_accumulate_weight_grads(
        &mut self,
        cache: &PowerCriticCache,
        tangent: &PowerTangentCache,
        seed: &Array1<f32>,
    ) {
        let g_scores = seed.clone().insert_axis(Axis(1));
        self.head.accumulate_weight_grad_only(&tangent.head_u, &g_scores);
        let g_pool = self.head.backward_input(&g_scores);
        let mut g = global_avg_pool_backward(&g_pool, cache.trunk_hw.0, cache.trunk_hw.1);
        for ((block, bc), (u_x, u_mid)) in self
            .blocks
            .iter_mut()
            .zip(&cache.block_caches)
            .zip(&tangent.block_srcs)
            .rev()
        {
            g = block.param_walk(bc, u_x, u_mid, &g, true);
        }
        let g_stem = masked4(&self.pool.backward(&cache.pool_cache, &g), &cache.stem_mask);
        self.stem.accumulate_weight_grads_only(&tangent.u0, &g_stem);
    }
}

impl Params for PowerCriticNet {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.stem.visit_params(&join(prefix, "stem"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_params(&join(prefix, &format!("res{}", i + 1)), f);
        }
        self.head.visit_params(&join(prefix, "head"), f);
    }
}
