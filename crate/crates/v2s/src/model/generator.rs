//! The video-to-waveform generator.
//!
//! Pipeline: a spatio-temporal front-end convolution over a five-frame window
//! around every frame, a ResNet-18 trunk collapsing each frame to one feature
//! vector, a two-layer bidirectional GRU smoothing those vectors over time,
//! and a six-layer transposed-convolution decoder expanding every smoothed
//! vector into a 1280-sample audio segment. Consecutive segments overlap by
//! half their length and are averaged, so a `T`-frame clip yields exactly
//! `T·640` samples.
//!
//! The front-end is realized as a 2D convolution whose input channels are the
//! five temporally clamped frames centered on the output frame — numerically
//! identical to a (5,7,7) 3D convolution with stride 1 in time and replicate
//! padding at the clip edges, but it reuses the 2D machinery.
//!
//! Training entry points ([`GeneratorNet::forward_train`] /
//! [`GeneratorNet::backward`]) carry explicit activation caches; inference
//! entry points (`encode*`, `decode`, `generate`) run on a shared reference
//! with batch norm frozen to its running statistics.

use ndarray::{s, Array2, Array3, Array4, ArrayD, ArrayView4, Axis};

use super::{masked3, masked4, relu3, relu4, scaled_width};
use crate::core::rng::SeededRng;
use crate::core::types::{FeatureSequence, VideoClip, Waveform, ROI_SIZE, SAMPLES_PER_FRAME};
use crate::error::{Error, Result};
use crate::nn::{
    self, global_avg_pool, global_avg_pool_backward, join, BatchNorm, BiGruStack, BiGruStackCache,
    BnCache, BnMode, BufferVisitor, Conv2d, ConvTranspose1d, MaxPool2d, MaxPoolCache, ParamVisitor,
    Params,
};

/// Temporal receptive field of the encoder front-end, in frames.
pub const FRONT_FRAMES: usize = 5;

/// Decoded segment length; twice the per-frame hop, so neighbors overlap by
/// half.
const SEGMENT_LEN: usize = 2 * SAMPLES_PER_FRAME;

const DEC_STRIDES: [usize; 6] = [5, 4, 4, 4, 2, 2];
const DEC_KERNELS: [usize; 6] = [15, 8, 8, 8, 4, 4];
const DEC_PADS: [usize; 6] = [5, 2, 2, 2, 1, 1];

/// One residual unit: two 3×3 convolutions with batch norm, plus a strided
/// 1×1 projection on the skip path whenever the shape changes.
struct BlockBn {
    conv1: Conv2d,
    bn1: BatchNorm,
    conv2: Conv2d,
    bn2: BatchNorm,
    proj: Option<(Conv2d, BatchNorm)>,
}

struct BlockBnCache {
    x: Array4<f32>,
    bc1: BnCache,
    mask1: ArrayD<f32>,
    mid: Array4<f32>,
    bc2: BnCache,
    proj_bc: Option<BnCache>,
    mask2: ArrayD<f32>,
}

impl BlockBn {
    fn new(in_ch: usize, out_ch: usize, stride: usize, rng: &mut SeededRng) -> Self {
        BlockBn {
            conv1: Conv2d::new(in_ch, out_ch, 3, stride, 1, false, rng),
            bn1: BatchNorm::new(out_ch),
            conv2: Conv2d::new(out_ch, out_ch, 3, 1, 1, false, rng),
            bn2: BatchNorm::new(out_ch),
            proj: (stride != 1 || in_ch != out_ch).then(|| {
                (Conv2d::new(in_ch, out_ch, 1, stride, 0, false, rng), BatchNorm::new(out_ch))
            }),
        }
    }

    fn forward(&mut self, x: Array4<f32>, mode: BnMode) -> (Array4<f32>, BlockBnCache) {
        let y1 = self.conv1.forward(&x);
        let (y2, bc1) = self.bn1.forward4(&y1, mode);
        let (mid, mask1) = relu4(&y2);
        let y4 = self.conv2.forward(&mid);
        let (mut pre, bc2) = self.bn2.forward4(&y4, mode);
        let proj_bc = match &mut self.proj {
            Some((pc, pbn)) => {
                let p = pc.forward(&x);
                let (pb, c) = pbn.forward4(&p, mode);
                pre += &pb;
                Some(c)
            }
            None => {
                pre += &x;
                None
            }
        };
        let (out, mask2) = relu4(&pre);
        (out, BlockBnCache { x, bc1, mask1, mid, bc2, proj_bc, mask2 })
    }

    fn forward_frozen(&self, x: &Array4<f32>) -> Array4<f32> {
        let mid = relu4(&self.bn1.forward4_frozen(&self.conv1.forward(x))).0;
        let mut pre = self.bn2.forward4_frozen(&self.conv2.forward(&mid));
        match &self.proj {
            Some((pc, pbn)) => pre += &pbn.forward4_frozen(&pc.forward(x)),
            None => pre += x,
        }
        relu4(&pre).0
    }

    /// Accumulates parameter gradients and returns the gradient at the block
    /// input.
    fn backward(&mut self, cache: &BlockBnCache, gy: &Array4<f32>) -> Array4<f32> {
        let (_, _, in_h, in_w) = cache.x.dim();
        let g_pre = masked4(gy, &cache.mask2);
        let mut gx = match (&mut self.proj, &cache.proj_bc) {
            (Some((pc, pbn)), Some(c)) => {
                let gp = pbn.backward4(c, &g_pre);
                pc.accumulate_param_grads(&cache.x, &gp);
                pc.backward_input(&gp, in_h, in_w)
            }
            // Identity skip: the branch passes the gradient straight through.
            _ => g_pre.clone(),
        };
        let g4 = self.bn2.backward4(&cache.bc2, &g_pre);
        self.conv2.accumulate_param_grads(&cache.mid, &g4);
        let g_mid = self.conv2.backward_input(&g4, cache.mid.dim().2, cache.mid.dim().3);
        let g2 = masked4(&g_mid, &cache.mask1);
        let g1 = self.bn1.backward4(&cache.bc1, &g2);
        self.conv1.accumulate_param_grads(&cache.x, &g1);
        gx += &self.conv1.backward_input(&g1, in_h, in_w);
        gx
    }
}

impl Params for BlockBn {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.conv1.visit_params(&join(prefix, "conv1"), f);
        self.bn1.visit_params(&join(prefix, "bn1"), f);
        self.conv2.visit_params(&join(prefix, "conv2"), f);
        self.bn2.visit_params(&join(prefix, "bn2"), f);
        if let Some((pc, pbn)) = &mut self.proj {
            pc.visit_params(&join(prefix, "proj.conv"), f);
            pbn.visit_params(&join(prefix, "proj.bn"), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: BufferVisitor<'_>) {
        self.bn1.visit_buffers(&join(prefix, "bn1"), f);
        self.bn2.visit_buffers(&join(prefix, "bn2"), f);
        if let Some((_, pbn)) = &mut self.proj {
            pbn.visit_buffers(&join(prefix, "proj.bn"), f);
        }
    }
}

pub struct GeneratorNet {
    front_conv: Conv2d,
    front_bn: BatchNorm,
    pool: MaxPool2d,
    /// Four stages of two residual units each, flattened in order.
    blocks: Vec<BlockBn>,
    temporal: BiGruStack,
    dec_convs: Vec<ConvTranspose1d>,
    dec_bns: Vec<BatchNorm>,
    feature_dim: usize,
}

/// Activations retained by [`GeneratorNet::forward_train`] for the matching
/// [`GeneratorNet::backward`] call. Opaque to callers.
pub struct GenCache {
    batch: usize,
    frames: usize,
    stacked: Array4<f32>,
    front_bc: BnCache,
    front_mask: ArrayD<f32>,
    pool_cache: MaxPoolCache,
    block_caches: Vec<BlockBnCache>,
    trunk_hw: (usize, usize),
    gru_in: Array3<f32>,
    gru_cache: BiGruStackCache,
    dec_inputs: Vec<Array3<f32>>,
    dec_bcs: Vec<BnCache>,
    dec_masks: Vec<ArrayD<f32>>,
    segments: Array3<f32>,
}

impl GeneratorNet {
    pub fn new(width_scale: f64, rng: &mut SeededRng) -> Self {
        let w = |c| scaled_width(c, width_scale);
        let (c1, c2, c3, c4) = (w(64), w(128), w(256), w(512));
        let hidden = w(256);
        let feature_dim = 2 * hidden;

        let mut blocks = Vec::with_capacity(8);
        for (in_ch, out_ch, stride) in
            [(c1, c1, 1), (c1, c2, 2), (c2, c3, 2), (c3, c4, 2)]
        {
            blocks.push(BlockBn::new(in_ch, out_ch, stride, rng));
            blocks.push(BlockBn::new(out_ch, out_ch, 1, rng));
        }

        let dec_widths =
            [feature_dim, w(256), w(128), w(64), w(32), w(16), 1];
        let mut dec_convs = Vec::with_capacity(6);
        let mut dec_bns = Vec::with_capacity(5);
        for l in 0..6 {
            // The last layer keeps its bias (no norm follows); the others are
            // bias-free because batch norm would cancel it.
            dec_convs.push(ConvTranspose1d::new(
                dec_widths[l],
                dec_widths[l + 1],
                DEC_KERNELS[l],
                DEC_STRIDES[l],
                DEC_PADS[l],
                l == 5,
                rng,
            ));
            if l < 5 {
                dec_bns.push(BatchNorm::new(dec_widths[l + 1]));
            }
        }

        GeneratorNet {
            front_conv: Conv2d::new(FRONT_FRAMES, c1, 7, 2, 3, false, rng),
            front_bn: BatchNorm::new(c1),
            pool: MaxPool2d::new(3, 2, 1),
            blocks,
            temporal: BiGruStack::new(c4, hidden, rng),
            dec_convs,
            dec_bns,
            feature_dim,
        }
    }

    /// Width of the per-frame feature vectors produced by the temporal stage
    /// and consumed by the decoder.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn check_roi(&self, clip: &VideoClip) -> Result<()> {
        if clip.height() != ROI_SIZE || clip.width() != ROI_SIZE {
            return Err(Error::Shape(format!(
                "video clip frames are {}×{}, expected {}×{}",
                clip.height(),
                clip.width(),
                ROI_SIZE,
                ROI_SIZE
            )));
        }
        Ok(())
    }

    // ---- training path -------------------------------------------------

    /// Runs a batch of clips `(B, T, H, W)` to waveforms `(B, T·640)`,
    /// retaining everything [`GeneratorNet::backward`] needs.
    ///
    /// `mode` selects batch-norm behavior: `TrainUpdate` for generator
    /// optimization steps, `TrainNoUpdate` when synthesizing critic fodder
    /// (so those passes leave the generator bitwise untouched).
    pub fn forward_train(&mut self, clips: &Array4<f32>, mode: BnMode) -> (Array2<f32>, GenCache) {
        let (batch, frames, h, w) = clips.dim();
        assert_eq!((h, w), (ROI_SIZE, ROI_SIZE), "clip spatial dims");
        assert!(batch > 0 && frames > 0, "empty clip batch");

        let stacked = stack_windows(clips.view());
        let y = self.front_conv.forward(&stacked);
        let (y, front_bc) = self.front_bn.forward4(&y, mode);
        let (y, front_mask) = relu4(&y);
        let (mut trunk, pool_cache) = self.pool.forward(&y);
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let (out, cache) = block.forward(trunk, mode);
            trunk = out;
            block_caches.push(cache);
        }
        let trunk_hw = (trunk.dim().2, trunk.dim().3);
        let pooled = global_avg_pool(&trunk); // (B·T, C)
        let c4 = pooled.dim().1;
        let gru_in = pooled
            .into_shape_with_order((batch, frames, c4))
            .expect("contiguous reshape");
        let (gru_out, gru_cache) = self.temporal.forward(&gru_in);

        let mut carry = gru_out
            .into_shape_with_order((batch * frames, self.feature_dim, 1))
            .expect("contiguous reshape");
        let mut dec_inputs = Vec::with_capacity(6);
        let mut dec_bcs = Vec::with_capacity(5);
        let mut dec_masks = Vec::with_capacity(5);
        for l in 0..6 {
            let y = self.dec_convs[l].forward(&carry);
            dec_inputs.push(carry);
            if l < 5 {
                let (yb, bc) = self.dec_bns[l].forward3(&y, mode);
                dec_bcs.push(bc);
                let (ya, m) = relu3(&yb);
                dec_masks.push(m);
                carry = ya;
            } else {
                carry = y;
            }
        }
        let segments = nn::tanh(&carry.view().into_dyn())
            .into_dimensionality::<ndarray::Ix3>()
            .expect("rank preserved");
        let wave = overlap_add_f32(&segments, batch, frames);
        let cache = GenCache {
            batch,
            frames,
            stacked,
            front_bc,
            front_mask,
            pool_cache,
            block_caches,
            trunk_hw,
            gru_in,
            gru_cache,
            dec_inputs,
            dec_bcs,
            dec_masks,
            segments,
        };
        (wave, cache)
    }

    /// Accumulates parameter gradients from a waveform gradient of shape
    /// `(B, T·640)`. Input gradients are not produced: nothing upstream of
    /// the video frames is trained.
    pub fn backward(&mut self, cache: &GenCache, d_wave: &Array2<f32>) {
        assert_eq!(d_wave.dim(), (cache.batch, cache.frames * SAMPLES_PER_FRAME));
        let d_seg = overlap_add_f32_backward(d_wave, cache.batch, cache.frames);
        let mut g = nn::tanh_backward(&d_seg.view().into_dyn(), &cache.segments.view().into_dyn())
            .into_dimensionality::<ndarray::Ix3>()
            .expect("rank preserved");
        for l in (0..6).rev() {
            if l < 5 {
                g = masked3(&g, &cache.dec_masks[l]);
                g = self.dec_bns[l].backward3(&cache.dec_bcs[l], &g);
            }
            self.dec_convs[l].accumulate_param_grads(&cache.dec_inputs[l], &g);
            g = self.dec_convs[l].backward_input(&g, cache.dec_inputs[l].dim().2);
        }
        let g_gru_out = g
            .into_shape_with_order((cache.batch, cache.frames, self.feature_dim))
            .expect("contiguous reshape");
        let g_gru_in = self.temporal.backward(&cache.gru_in, &cache.gru_cache, &g_gru_out);
        let c4 = g_gru_in.dim().2;
        let g_pooled = g_gru_in
            .into_shape_with_order((cache.batch * cache.frames, c4))
            .expect("contiguous reshape");
        let mut gt = global_avg_pool_backward(&g_pooled, cache.trunk_hw.0, cache.trunk_hw.1);
        for (block, bc) in self.blocks.iter_mut().zip(&cache.block_caches).rev() {
            gt = block.backward(bc, &gt);
        }
        let gp = self.pool.backward(&cache.pool_cache, &gt);
        let g_act = masked4(&gp, &cache.front_mask);
        let g_conv = self.front_bn.backward4(&cache.front_bc, &g_act);
        // First layer: parameter gradients only; the pixels are data.
        self.front_conv.accumulate_param_grads(&cache.stacked, &g_conv);
    }

    // ---- inference path (frozen batch norm, shared reference) ----------

    /// Per-frame features *before* the recurrent stage: row `t` depends only
    /// on frames `t−2..=t+2` of the input (clamped at the clip edges).
    pub fn encode_local(&self, clip: &VideoClip) -> Result<FeatureSequence> {
        self.check_roi(clip)?;
        let frames = clip.num_frames();
        let stacked = stack_windows(clip.frames().view().insert_axis(Axis(0)));
        let y = self.front_conv.forward(&stacked);
        let y = relu4(&self.front_bn.forward4_frozen(&y)).0;
        let (mut trunk, _) = self.pool.forward(&y);
        for block in &self.blocks {
            trunk = block.forward_frozen(&trunk);
        }
        let pooled = global_avg_pool(&trunk);
        debug_assert_eq!(pooled.dim().0, frames);
        Ok(FeatureSequence { features: pooled })
    }

    /// Full encoder: local features smoothed by the bidirectional GRU into
    /// one `feature_dim`-vector per frame.
    pub fn encode(&self, clip: &VideoClip) -> Result<FeatureSequence> {
        let local = self.encode_local(clip)?;
        let (frames, c4) = local.features.dim();
        let x = local
            .features
            .into_shape_with_order((1, frames, c4))
            .expect("contiguous reshape");
        let (out, _) = self.temporal.forward(&x);
        let features = out
            .into_shape_with_order((frames, self.feature_dim))
            .expect("contiguous reshape");
        Ok(FeatureSequence { features })
    }

    /// Expands per-frame features into overlapped audio segments and merges
    /// them; `T` feature rows become exactly `T·640` samples in `[-1, 1]`.
    pub fn decode(&self, features: &FeatureSequence) -> Result<Waveform> {
        if features.dim() != self.feature_dim {
            return Err(Error::Shape(format!(
                "feature dim {} does not match decoder input width {}",
                features.dim(),
                self.feature_dim
            )));
        }
        let frames = features.num_frames();
        if frames == 0 {
            return Err(Error::Shape("cannot decode an empty feature sequence".into()));
        }
        let mut h = features
            .features
            .clone()
            .into_shape_with_order((frames, self.feature_dim, 1))
            .expect("contiguous reshape");
        for l in 0..6 {
            h = self.dec_convs[l].forward(&h);
            if l < 5 {
                h = relu3(&self.dec_bns[l].forward3_frozen(&h)).0;
            }
        }
        let segments = nn::tanh(&h.view().into_dyn())
            .into_dimensionality::<ndarray::Ix3>()
            .expect("rank preserved");
        let wave = overlap_add_f32(&segments, 1, frames);
        Waveform::new(wave.row(0).to_vec(), crate::core::types::SAMPLE_RATE)
    }

    /// Video in, speech out: `encode` composed with `decode`.
    pub fn generate(&self, clip: &VideoClip) -> Result<Waveform> {
        let features = self.encode(clip)?;
        self.decode(&features)
    }
}

impl Params for GeneratorNet {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.front_conv.visit_params(&join(prefix, "front.conv"), f);
        self.front_bn.visit_params(&join(prefix, "front.bn"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_params(&join(prefix, &format!("res{}", i + 1)), f);
        }
        self.temporal.visit_params(&join(prefix, "gru"), f);
        for (i, conv) in self.dec_convs.iter_mut().enumerate() {
            conv.visit_params(&join(prefix, &format!("dec{}", i + 1)), f);
        }
        for (i, bn) in self.dec_bns.iter_mut().enumerate() {
            bn.visit_params(&join(prefix, &format!("dec{}.bn", i + 1)), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: BufferVisitor<'_>) {
        self.front_bn.visit_buffers(&join(prefix, "front.bn"), f);
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit_buffers(&join(prefix, &format!("res{}", i + 1)), f);
        }
        for (i, bn) in self.dec_bns.iter_mut().enumerate() {
            bn.visit_buffers(&join(prefix, &format!("dec{}.bn", i + 1)), f);
        }
    }
}

/// Gathers the five-frame window around every frame into input channels:
/// `(B, T, H, W)` → `(B·T, 5, H, W)`, clamping at the clip edges so frame 0
/// sees `[0, 0, 0, 1, 2]` and the last frame mirrors that.
fn stack_windows(clips: ArrayView4<'_, f32>) -> Array4<f32> {
    let (b, t, h, w) = clips.dim();
    let half = FRONT_FRAMES / 2;
    let mut out = Array4::zeros((b * t, FRONT_FRAMES, h, w));
    for bi in 0..b {
        for ti in 0..t {
            for c in 0..FRONT_FRAMES {
                let src = (ti + c).saturating_sub(half).min(t - 1);
                out.slice_mut(s![bi * t + ti, c, .., ..])
                    .assign(&clips.slice(s![bi, src, .., ..]));
            }
        }
    }
    out
}

/// Merges per-frame segments `(B·T, 1, 1280)` into waveforms `(B, T·640)`:
/// the first 640 samples of a clip come from frame 0 alone, every later
/// sample is the mean of the two segments overlapping it, and the final
/// segment's tail is trimmed.
fn overlap_add_f32(segments: &Array3<f32>, batch: usize, frames: usize) -> Array2<f32> {
    let n = SAMPLES_PER_FRAME;
    assert_eq!(segments.dim(), (batch * frames, 1, SEGMENT_LEN));
    let mut out = Array2::zeros((batch, frames * n));
    for bi in 0..batch {
        for ti in 0..frames {
            let row = bi * frames + ti;
            for i in 0..n {
                let front = segments[(row, 0, i)];
                out[(bi, ti * n + i)] = if ti == 0 {
                    front
                } else {
                    0.5 * (front + segments[(row - 1, 0, n + i)])
                };
            }
        }
    }
    out
}

fn overlap_add_f32_backward(g: &Array2<f32>, batch: usize, frames: usize) -> Array3<f32> {
    let n = SAMPLES_PER_FRAME;
    let mut gs = Array3::zeros((batch * frames, 1, SEGMENT_LEN));
    for bi in 0..batch {
        for ti in 0..frames {
            let row = bi * frames + ti;
            let head_weight = if ti == 0 { 1.0 } else { 0.5 };
            for i in 0..n {
                gs[(row, 0, i)] = head_weight * g[(bi, ti * n + i)];
                if ti + 1 < frames {
                    gs[(row, 0, n + i)] = 0.5 * g[(bi, (ti + 1) * n + i)];
                }
            }
        }
    }
    gs
}
