//! Batch normalization over the channel axis, for (B, C, L) and (B, C, H, W)
//! tensors.
//!
//! Three forward modes: `TrainUpdate` (batch statistics, running stats
//! updated), `TrainNoUpdate` (batch statistics, running stats untouched —
//! used when the generator produces critic fodder, so generating fakes
//! leaves the generator bitwise unchanged), and `Eval` (running statistics).

use ndarray::{Array1, Array2, Array3, Array4, Axis};

use crate::nn::module::{join, BufferVisitor, ParamVisitor, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    TrainUpdate,
    TrainNoUpdate,
    Eval,
}

impl BnMode {
    pub fn uses_batch_stats(self) -> bool {
        matches!(self, BnMode::TrainUpdate | BnMode::TrainNoUpdate)
    }
}

const EPS: f32 = 1e-5;
const MOMENTUM: f32 = 0.1;

pub struct BatchNorm {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub grad_gamma: Array1<f32>,
    pub grad_beta: Array1<f32>,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
}

/// Per-call state for the backward pass: the normalized activations and the
/// per-channel inverse standard deviation actually used.
pub struct BnCache {
    x_hat: Array2<f32>, // (C, B·M) channel-major
    inv_std: Array1<f32>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            grad_gamma: Array1::zeros(channels),
            grad_beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Core forward on a channel-major matrix (C, N) where N gathers batch
    /// and spatial positions.
    fn forward_cm(&mut self, x: &Array2<f32>, mode: BnMode) -> (Array2<f32>, BnCache) {
        let (c, n) = x.dim();
        assert_eq!(c, self.channels(), "batchnorm channel count");
        assert!(n > 0, "batchnorm needs at least one position");
        let (mean, var) = if mode.uses_batch_stats() {
            let mean = x.mean_axis(Axis(1)).expect("n > 0");
            let mut var = Array1::zeros(c);
            for ci in 0..c {
                let m = mean[ci];
                var[ci] = x.row(ci).iter().map(|&v| (v - m) * (v - m)).sum::<f32>() / n as f32;
            }
            if mode == BnMode::TrainUpdate {
                let unbias = if n > 1 { n as f32 / (n as f32 - 1.0) } else { 1.0 };
                for ci in 0..c {
                    self.running_mean[ci] =
                        (1.0 - MOMENTUM) * self.running_mean[ci] + MOMENTUM * mean[ci];
                    self.running_var[ci] =
                        (1.0 - MOMENTUM) * self.running_var[ci] + MOMENTUM * var[ci] * unbias;
                }
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };
        let inv_std = var.mapv(|v| 1.0 / (v + EPS).sqrt());
        let mut x_hat = x.clone();
        for ci in 0..c {
            let m = mean[ci];
            let is = inv_std[ci];
            x_hat.row_mut(ci).mapv_inplace(|v| (v - m) * is);
        }
        let mut y = x_hat.clone();
        for ci in 0..c {
            let g = self.gamma[ci];
            let b = self.beta[ci];
            y.row_mut(ci).mapv_inplace(|v| g * v + b);
        }
        (y, BnCache { x_hat, inv_std })
    }

    /// Backward for batch-statistics modes. Maps the output gradient to the
    /// input gradient and accumulates gamma/beta gradients.
    fn backward_cm(&mut self, cache: &BnCache, gy: &Array2<f32>) -> Array2<f32> {
        let (c, n) = gy.dim();
        let mut gx = Array2::zeros((c, n));
        for ci in 0..c {
            let gy_row = gy.row(ci);
            let xh_row = cache.x_hat.row(ci);
            let sum_gy: f32 = gy_row.sum();
            let sum_gy_xh: f32 = gy_row.iter().zip(xh_row.iter()).map(|(&a, &b)| a * b).sum();
            self.grad_beta[ci] += sum_gy;
            self.grad_gamma[ci] += sum_gy_xh;
            let scale = self.gamma[ci] * cache.inv_std[ci];
            let mean_gy = sum_gy / n as f32;
            let mean_gy_xh = sum_gy_xh / n as f32;
            let mut gx_row = gx.row_mut(ci);
            for (j, g) in gx_row.iter_mut().enumerate() {
                *g = scale * (gy_row[j] - mean_gy - xh_row[j] * mean_gy_xh);
            }
        }
        gx
    }

    // (B, C, L) wrappers: transpose to channel-major, run the core, restore.

    pub fn forward3(&mut self, x: &Array3<f32>, mode: BnMode) -> (Array3<f32>, BnCache) {
        let (b, c, l) = x.dim();
        let cm = to_cm3(x);
        let (y, cache) = self.forward_cm(&cm, mode);
        (from_cm3(&y, b, c, l), cache)
    }

    pub fn backward3(&mut self, cache: &BnCache, gy: &Array3<f32>) -> Array3<f32> {
        let (b, c, l) = gy.dim();
        let cm = to_cm3(gy);
        let gx = self.backward_cm(cache, &cm);
        from_cm3(&gx, b, c, l)
    }

    pub fn forward4(&mut self, x: &Array4<f32>, mode: BnMode) -> (Array4<f32>, BnCache) {
        let (b, c, h, w) = x.dim();
        let cm = to_cm4(x);
        let (y, cache) = self.forward_cm(&cm, mode);
        (from_cm4(&y, b, c, h, w), cache)
    }

    pub fn backward4(&mut self, cache: &BnCache, gy: &Array4<f32>) -> Array4<f32> {
        let (b, c, h, w) = gy.dim();
        let cm = to_cm4(gy);
        let gx = self.backward_cm(cache, &cm);
        from_cm4(&gx, b, c, h, w)
    }

    // Inference-only forwards using running statistics: no cache, no state
    // mutation, callable through a shared reference. Element arithmetic is
    // ordered exactly as in the `Eval`-mode training forward so the two
    // paths agree bitwise.

    pub fn forward3_frozen(&self, x: &Array3<f32>) -> Array3<f32> {
        let mut y = x.clone();
        for ci in 0..self.channels() {
            let (m, is, g, b) = self.frozen_channel(ci);
            y.slice_mut(ndarray::s![.., ci, ..])
                .mapv_inplace(|v| g * ((v - m) * is) + b);
        }
        y
    }

    pub fn forward4_frozen(&self, x: &Array4<f32>) -> Array4<f32> {
        let mut y = x.clone();
        for ci in 0..self.channels() {
            let (m, is, g, b) = self.frozen_channel(ci);
            y.slice_mut(ndarray::s![.., ci, .., ..])
                .mapv_inplace(|v| g * ((v - m) * is) + b);
        }
        y
    }

    fn frozen_channel(&self, ci: usize) -> (f32, f32, f32, f32) {
        (
            self.running_mean[ci],
            1.0 / (self.running_var[ci] + EPS).sqrt(),
            self.gamma[ci],
            self.beta[ci],
        )
    }
}

fn to_cm3(x: &Array3<f32>) -> Array2<f32> {
    let (b, c, l) = x.dim();
    let mut out = Array2::zeros((c, b * l));
    for bi in 0..b {
        for ci in 0..c {
            for li in 0..l {
                out[[ci, bi * l + li]] = x[[bi, ci, li]];
            }
        }
    }
    out
}

fn from_cm3(cm: &Array2<f32>, b: usize, c: usize, l: usize) -> Array3<f32> {
    let mut out = Array3::zeros((b, c, l));
    for bi in 0..b {
        for ci in 0..c {
            for li in 0..l {
                out[[bi, ci, li]] = cm[[ci, bi * l + li]];
            }
        }
    }
    out
}

fn to_cm4(x: &Array4<f32>) -> Array2<f32> {
    let (b, c, h, w) = x.dim();
    let m = h * w;
    let mut out = Array2::zeros((c, b * m));
    for bi in 0..b {
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    out[[ci, bi * m + hi * w + wi]] = x[[bi, ci, hi, wi]];
                }
            }
        }
    }
    out
}

fn from_cm4(cm: &Array2<f32>, b: usize, c: usize, h: usize, w: usize) -> Array4<f32> {
    let m = h * w;
    let mut out = Array4::zeros((b, c, h, w));
    for bi in 0..b {
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    out[[bi, ci, hi, wi]] = cm[[ci, bi * m + hi * w + wi]];
                }
            }
        }
    }
    out
}

impl Params for BatchNorm {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        f(
            &join(prefix, "gamma"),
            self.gamma.view_mut().into_dyn(),
            self.grad_gamma.view_mut().into_dyn(),
        );
        f(
            &join(prefix, "beta"),
            self.beta.view_mut().into_dyn(),
            self.grad_beta.view_mut().into_dyn(),
        );
    }

    fn visit_buffers(&mut self, prefix: &str, f: BufferVisitor<'_>) {
        f(&join(prefix, "running_mean"), self.running_mean.view_mut().into_dyn());
        f(&join(prefix, "running_var"), self.running_var.view_mut().into_dyn());
    }
}
