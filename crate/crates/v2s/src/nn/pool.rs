//! Spatial pooling.

use ndarray::{s, Array2, Array4};

/// Max pooling over (B, C, H, W) windows. The cache records each output's
/// source index, which also serves as the tangent pass (selection is locally
/// linear in the input).
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

pub struct MaxPoolCache {
    /// Flat input index (h·W + w) chosen for each output position.
    pub argmax: Array4<usize>,
    pub in_h: usize,
    pub in_w: usize,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        MaxPool2d { kernel, stride, padding }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.padding - self.kernel) / self.stride + 1,
            (w + 2 * self.padding - self.kernel) / self.stride + 1,
        )
    }

    pub fn forward(&self, x: &Array4<f32>) -> (Array4<f32>, MaxPoolCache) {
        let (b, c, h, w) = x.dim();
        let (oh, ow) = self.out_size(h, w);
        let mut y = Array4::zeros((b, c, oh, ow));
        let mut argmax = Array4::zeros((b, c, oh, ow));
        for bi in 0..b {
            for ci in 0..c {
                let plane = x.slice(s![bi, ci, .., ..]);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f32::NEG_INFINITY;
                        let mut best_idx = 0usize;
                        for ky in 0..self.kernel {
                            let iy = oy * self.stride + ky;
                            if iy < self.padding || iy - self.padding >= h {
                                continue;
                            }
                            for kx in 0..self.kernel {
                                let ix = ox * self.stride + kx;
                                if ix < self.padding || ix - self.padding >= w {
                                    continue;
                                }
                                let v = plane[[iy - self.padding, ix - self.padding]];
                                if v > best {
                                    best = v;
                                    best_idx = (iy - self.padding) * w + (ix - self.padding);
                                }
                            }
                        }
                        y[[bi, ci, oy, ox]] = best;
                        argmax[[bi, ci, oy, ox]] = best_idx;
                    }
                }
            }
        }
        (y, MaxPoolCache { argmax, in_h: h, in_w: w })
    }

    /// Routes each output gradient back to its argmax source.
    pub fn backward(&self, cache: &MaxPoolCache, gy: &Array4<f32>) -> Array4<f32> {
        let (b, c, oh, ow) = gy.dim();
        let mut gx = Array4::zeros((b, c, cache.in_h, cache.in_w));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = cache.argmax[[bi, ci, oy, ox]];
                        gx[[bi, ci, idx / cache.in_w, idx % cache.in_w]] += gy[[bi, ci, oy, ox]];
                    }
                }
            }
        }
        gx
    }

    /// Tangent pass: gathers the tangent at each cached argmax position.
    pub fn tangent(&self, cache: &MaxPoolCache, u: &Array4<f32>) -> Array4<f32> {
        let (b, c, oh, ow) = cache.argmax.dim();
        let mut out = Array4::zeros((b, c, oh, ow));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = cache.argmax[[bi, ci, oy, ox]];
                        out[[bi, ci, oy, ox]] = u[[bi, ci, idx / cache.in_w, idx % cache.in_w]];
                    }
                }
            }
        }
        out
    }
}

/// Global average over the spatial axes: (B, C, H, W) → (B, C).
pub fn global_avg_pool(x: &Array4<f32>) -> Array2<f32> {
    let (b, c, h, w) = x.dim();
    let scale = 1.0 / (h * w) as f32;
    Array2::from_shape_fn((b, c), |(bi, ci)| x.slice(s![bi, ci, .., ..]).sum() * scale)
}

/// Backward of `global_avg_pool`: spreads each gradient uniformly.
pub fn global_avg_pool_backward(gy: &Array2<f32>, h: usize, w: usize) -> Array4<f32> {
    let (b, c) = gy.dim();
    let scale = 1.0 / (h * w) as f32;
    Array4::from_shape_fn((b, c, h, w), |(bi, ci, _, _)| gy[[bi, ci]] * scale)
}
