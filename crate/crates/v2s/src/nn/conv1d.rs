//! Strided, padded, optionally grouped 1-D convolution via im2col + GEMM.
//!
//! The four pass variants exist because the gradient penalty needs a
//! forward-tangent (Jacobian-vector) pass and a backward over that tangent
//! graph: `forward_nobias` is the tangent of `forward`, and
//! `accumulate_weight_grads_only` is the parameter backward of the tangent
//! graph, where biases never appear.

use ndarray::{s, Array1, Array2, Array3};

use crate::core::SeededRng;
use crate::nn::gather::{gather_tap, scatter_tap_add, tap_range};
use crate::nn::init::uniform_fan_in;
use crate::nn::module::{join, ParamVisitor, Params};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest usable group count at or below `wanted` that divides both
/// channel counts.
pub fn clamp_groups(wanted: usize, in_ch: usize, out_ch: usize) -> usize {
    gcd(gcd(wanted.max(1), in_ch), out_ch)
}

pub struct Conv1d {
    pub weight: Array3<f32>, // (out_ch, in_ch/groups, kernel)
    pub bias: Option<Array1<f32>>,
    pub grad_weight: Array3<f32>,
    pub grad_bias: Option<Array1<f32>>,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        with_bias: bool,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(groups >= 1 && in_ch % groups == 0 && out_ch % groups == 0);
        let fan_in = (in_ch / groups) * kernel;
        Conv1d {
            weight: uniform_fan_in((out_ch, in_ch / groups, kernel), fan_in, rng),
            bias: with_bias.then(|| uniform_fan_in(out_ch, fan_in, rng)),
            grad_weight: Array3::zeros((out_ch, in_ch / groups, kernel)),
            grad_bias: with_bias.then(|| Array1::zeros(out_ch)),
            stride,
            padding,
            groups,
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        let k = self.weight.dim().2;
        (in_len + 2 * self.padding - k) / self.stride + 1
    }

    fn dims(&self) -> (usize, usize, usize) {
        let (out_ch, in_per_group, k) = self.weight.dim();
        (out_ch, in_per_group * self.groups, k)
    }

    /// Gathers one batch item's group slice into im2col layout
    /// (in_per_group·k, out_len); padding reads as zero.
    fn im2col(&self, x: &Array3<f32>, b: usize, g: usize, out_len: usize) -> Array2<f32> {
        let (_, in_ch, k) = self.dims();
        let in_per_group = in_ch / self.groups;
        let in_len = x.dim().2;
        let mut col = Array2::zeros((in_per_group * k, out_len));
        for c in 0..in_per_group {
            let src = x.slice(s![b, g * in_per_group + c, ..]);
            let src = src.to_slice().expect("input row is contiguous");
            for ki in 0..k {
                let Some(range) = tap_range(self.stride, self.padding, ki, in_len, out_len)
                else {
                    continue;
                };
                let row = col.row_mut(c * k + ki);
                let dst = row.into_slice().expect("col row is contiguous");
                gather_tap(dst, src, self.stride, range);
            }
        }
        col
    }

    /// Scatter-adds an im2col-layout gradient back onto the input slice.
    fn col2im(&self, gcol: &Array2<f32>, gx: &mut Array3<f32>, b: usize, g: usize) {
        let (_, in_ch, k) = self.dims();
        let in_per_group = in_ch / self.groups;
        let in_len = gx.dim().2;
        let out_len = gcol.dim().1;
        for c in 0..in_per_group {
            let mut dst = gx.slice_mut(s![b, g * in_per_group + c, ..]);
            let dst = dst.as_slice_mut().expect("grad row is contiguous");
            for ki in 0..k {
                let Some(range) = tap_range(self.stride, self.padding, ki, in_len, out_len)
                else {
                    continue;
                };
                let src = gcol.row(c * k + ki);
                let src = src.to_slice().expect("gcol row is contiguous");
                scatter_tap_add(dst, src, self.stride, range);
            }
        }
    }

    fn forward_impl(&self, x: &Array3<f32>, with_bias: bool) -> Array3<f32> {
        let (batch, in_ch, in_len) = x.dim();
        let (out_ch, expected_in, _) = self.dims();
        assert_eq!(in_ch, expected_in, "conv1d input channels");
        let out_len = self.out_len(in_len);
        let out_per_group = out_ch / self.groups;
        let mut y = Array3::zeros((batch, out_ch, out_len));
        // Weight rows for group g, flattened to (out_per_group, in_per_group·k).
        let w_flat = self
            .weight
            .view()
            .into_shape_with_order((out_ch, self.weight.dim().1 * self.weight.dim().2))
            .expect("weight is contiguous");
        for b in 0..batch {
            for g in 0..self.groups {
                let col = self.im2col(x, b, g, out_len);
                let w_g = w_flat.slice(s![g * out_per_group..(g + 1) * out_per_group, ..]);
                let prod = w_g.dot(&col); // (out_per_group, out_len)
                let mut dst = y.slice_mut(s![b, g * out_per_group..(g + 1) * out_per_group, ..]);
                dst.assign(&prod);
            }
        }
        if with_bias {
            if let Some(bias) = &self.bias {
                for b in 0..batch {
                    for co in 0..out_ch {
                        let mut row = y.slice_mut(s![b, co, ..]);
                        row += bias[co];
                    }
                }
            }
        }
        y
    }

    /// x: (batch, in_ch, len) → (batch, out_ch, out_len).
    pub fn forward(&self, x: &Array3<f32>) -> Array3<f32> {
        self.forward_impl(x, true)
    }

    /// Tangent pass: the same linear map with the bias dropped.
    pub fn forward_nobias(&self, x: &Array3<f32>) -> Array3<f32> {
        self.forward_impl(x, false)
    }

    /// Gradient w.r.t. the input; pure (no parameter-gradient side effects).
    pub fn backward_input(&self, gy: &Array3<f32>, in_len: usize) -> Array3<f32> {
        let (batch, out_ch, _) = gy.dim();
        let (expected_out, in_ch, _) = self.dims();
        assert_eq!(out_ch, expected_out, "conv1d grad channels");
        let out_per_group = out_ch / self.groups;
        let mut gx = Array3::zeros((batch, in_ch, in_len));
        let w_flat = self
            .weight
            .view()
            .into_shape_with_order((out_ch, self.weight.dim().1 * self.weight.dim().2))
            .expect("weight is contiguous");
        for b in 0..batch {
            for g in 0..self.groups {
                let w_g = w_flat.slice(s![g * out_per_group..(g + 1) * out_per_group, ..]);
                let gy_g = gy.slice(s![b, g * out_per_group..(g + 1) * out_per_group, ..]);
                let gcol = w_g.t().dot(&gy_g); // (in_per_group·k, out_len)
                self.col2im(&gcol, &mut gx, b, g);
            }
        }
        gx
    }

    /// Accumulates weight and bias gradients from (input, output-gradient).
    pub fn accumulate_param_grads(&mut self, x: &Array3<f32>, gy: &Array3<f32>) {
        self.accumulate_weight_grads_only(x, gy);
        if let Some(gb) = &mut self.grad_bias {
            let (batch, out_ch, _) = gy.dim();
            for b in 0..batch {
                for co in 0..out_ch {
                    gb[co] += gy.slice(s![b, co, ..]).sum();
                }
            }
        }
    }

    /// Weight gradients only — the parameter backward of the tangent graph.
    pub fn accumulate_weight_grads_only(&mut self, x: &Array3<f32>, gy: &Array3<f32>) {
        let (batch, _, out_len) = gy.dim();
        let (out_ch, in_per_group, k) = self.weight.dim();
        let out_per_group = out_ch / self.groups;
        let mut acc = Array2::<f32>::zeros((out_ch, in_per_group * k));
        for b in 0..batch {
            for g in 0..self.groups {
                let col = self.im2col(x, b, g, out_len);
                let gy_g = gy.slice(s![b, g * out_per_group..(g + 1) * out_per_group, ..]);
                let gw = gy_g.dot(&col.t()); // (out_per_group, in_per_group·k)
                let mut dst = acc.slice_mut(s![g * out_per_group..(g + 1) * out_per_group, ..]);
                dst += &gw;
            }
        }
        let mut gw_flat = self
            .grad_weight
            .view_mut()
            .into_shape_with_order((out_ch, in_per_group * k))
            .expect("grad weight is contiguous");
        gw_flat += &acc;
    }
}

impl Params for Conv1d {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        f(
            &join(prefix, "weight"),
            self.weight.view_mut().into_dyn(),
            self.grad_weight.view_mut().into_dyn(),
        );
        if let (Some(b), Some(gb)) = (&mut self.bias, &mut self.grad_bias) {
            f(&join(prefix, "bias"), b.view_mut().into_dyn(), gb.view_mut().into_dyn());
        }
    }
}
