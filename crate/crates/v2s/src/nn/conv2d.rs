//! Strided, padded 2-D convolution via im2col + GEMM.

use ndarray::{s, Array1, Array2, Array4};

use crate::core::SeededRng;
use crate::nn::gather::{gather_tap, scatter_tap_add, tap_range};
use crate::nn::init::uniform_fan_in;
use crate::nn::module::{join, ParamVisitor, Params};

pub struct Conv2d {
    pub weight: Array4<f32>, // (out_ch, in_ch, kh, kw)
    pub bias: Option<Array1<f32>>,
    pub grad_weight: Array4<f32>,
    pub grad_bias: Option<Array1<f32>>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        with_bias: bool,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        Conv2d {
            weight: uniform_fan_in((out_ch, in_ch, kernel, kernel), fan_in, rng),
            bias: with_bias.then(|| uniform_fan_in(out_ch, fan_in, rng)),
            grad_weight: Array4::zeros((out_ch, in_ch, kernel, kernel)),
            grad_bias: with_bias.then(|| Array1::zeros(out_ch)),
            stride,
            padding,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.weight.dim().2;
        (
            (h + 2 * self.padding - k) / self.stride + 1,
            (w + 2 * self.padding - k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &Array4<f32>, b: usize, oh: usize, ow: usize) -> Array2<f32> {
        let (_, in_ch, k, _) = self.weight.dim();
        let (_, _, h, w) = x.dim();
        let mut col = Array2::zeros((in_ch * k * k, oh * ow));
        for c in 0..in_ch {
            for ki in 0..k {
                for kj in 0..k {
                    let Some(range) = tap_range(self.stride, self.padding, kj, w, ow) else {
                        continue;
                    };
                    let row = col.row_mut((c * k + ki) * k + kj);
                    let dst = row.into_slice().expect("col row is contiguous");
                    for oy in 0..oh {
                        let iy = oy * self.stride + ki;
                        if iy < self.padding || iy - self.padding >= h {
                            continue;
                        }
                        let src = x.slice(s![b, c, iy - self.padding, ..]);
                        let src = src.to_slice().expect("input row is contiguous");
                        gather_tap(&mut dst[oy * ow..(oy + 1) * ow], src, self.stride, range);
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, gcol: &Array2<f32>, gx: &mut Array4<f32>, b: usize, oh: usize, ow: usize) {
        let (_, in_ch, k, _) = self.weight.dim();
        let (_, _, h, w) = gx.dim();
        for c in 0..in_ch {
            for ki in 0..k {
                for kj in 0..k {
                    let Some(range) = tap_range(self.stride, self.padding, kj, w, ow) else {
                        continue;
                    };
                    let src = gcol.row((c * k + ki) * k + kj);
                    let src = src.to_slice().expect("gcol row is contiguous");
                    for oy in 0..oh {
                        let iy = oy * self.stride + ki;
                        if iy < self.padding || iy - self.padding >= h {
                            continue;
                        }
                        let mut dst = gx.slice_mut(s![b, c, iy - self.padding, ..]);
                        let dst = dst.as_slice_mut().expect("grad row is contiguous");
                        scatter_tap_add(dst, &src[oy * ow..(oy + 1) * ow], self.stride, range);
                    }
                }
            }
        }
    }

    fn w_flat(&self) -> ndarray::ArrayView2<'_, f32> {
        let (out_ch, in_ch, k, _) = self.weight.dim();
        self.weight
            .view()
            .into_shape_with_order((out_ch, in_ch * k * k))
            .expect("weight is contiguous")
    }

    fn forward_impl(&self, x: &Array4<f32>, with_bias: bool) -> Array4<f32> {
        let (batch, in_ch, h, w) = x.dim();
        assert_eq!(in_ch, self.weight.dim().1, "conv2d input channels");
        let (oh, ow) = self.out_size(h, w);
        let out_ch = self.weight.dim().0;
        let mut y = Array4::zeros((batch, out_ch, oh, ow));
        let w_flat = self.w_flat();
        for b in 0..batch {
            let col = self.im2col(x, b, oh, ow);
            let prod = w_flat.dot(&col); // (out_ch, oh·ow)
            let mut dst = y
                .slice_mut(s![b, .., .., ..])
                .into_shape_with_order((out_ch, oh * ow))
                .expect("output slice is contiguous");
            dst.assign(&prod);
        }
        if with_bias {
            if let Some(bias) = &self.bias {
                for b in 0..batch {
                    for co in 0..out_ch {
                        let mut plane = y.slice_mut(s![b, co, .., ..]);
                        plane += bias[co];
                    }
                }
            }
        }
        y
    }

    /// x: (batch, in_ch, h, w) → (batch, out_ch, oh, ow).
    pub fn forward(&self, x: &Array4<f32>) -> Array4<f32> {
        self.forward_impl(x, true)
    }

    /// Tangent pass: same linear map, bias dropped.
    pub fn forward_nobias(&self, x: &Array4<f32>) -> Array4<f32> {
        self.forward_impl(x, false)
    }

    pub fn backward_input(&self, gy: &Array4<f32>, h: usize, w: usize) -> Array4<f32> {
        let (batch, out_ch, oh, ow) = gy.dim();
        let in_ch = self.weight.dim().1;
        let mut gx = Array4::zeros((batch, in_ch, h, w));
        let w_flat = self.w_flat();
        for b in 0..batch {
            let gy_b = gy
                .slice(s![b, .., .., ..])
                .into_shape_with_order((out_ch, oh * ow))
                .expect("grad slice is contiguous");
            let gcol = w_flat.t().dot(&gy_b);
            self.col2im(&gcol, &mut gx, b, oh, ow);
        }
        gx
    }

    pub fn accumulate_param_grads(&mut self, x: &Array4<f32>, gy: &Array4<f32>) {
        self.accumulate_weight_grads_only(x, gy);
        if let Some(gb) = &mut self.grad_bias {
            let (batch, out_ch, _, _) = gy.dim();
            for b in 0..batch {
                for co in 0..out_ch {
                    gb[co] += gy.slice(s![b, co, .., ..]).sum();
                }
            }
        }
    }

    pub fn accumulate_weight_grads_only(&mut self, x: &Array4<f32>, gy: &Array4<f32>) {
        let (batch, out_ch, oh, ow) = gy.dim();
        let (_, in_ch, k, _) = self.weight.dim();
        let mut acc = Array2::<f32>::zeros((out_ch, in_ch * k * k));
        for b in 0..batch {
            let col = self.im2col(x, b, oh, ow);
            let gy_b = gy
                .slice(s![b, .., .., ..])
                .into_shape_with_order((out_ch, oh * ow))
                .expect("grad slice is contiguous");
            acc += &gy_b.dot(&col.t());
        }
        let mut gw_flat = self
            .grad_weight
            .view_mut()
            .into_shape_with_order((out_ch, in_ch * k * k))
            .expect("grad weight is contiguous");
        gw_flat += &acc;
    }
}

impl Params for Conv2d {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rng::streams;

    fn test_rng() -> SeededRng {
        SeededRng::new(11, streams::INIT_POWER_CRITIC)
    }

    fn pseudo_input(batch: usize, ch: usize, h: usize, w: usize) -> Array4<f32> {
        Array4::from_shape_fn((batch, ch, h, w), |(b, c, i, j)| {
            (((b * 41 + c * 29 + i * 13 + j * 5) % 19) as f32 / 19.0) - 0.5
        })
    }

    #[test]
    fn output_size_formula() {
        let conv = Conv2d::new(1, 16, 7, 2, 3, true, &mut test_rng());
        assert_eq!(conv.out_size(96, 96), (48, 48));
        assert_eq!(conv.out_size(257, 98), (129, 49));
    }

    #[test]
    fn averaging_kernel_on_constant_input() {
        let mut conv = Conv2d::new(1, 1, 3, 1, 0, false, &mut test_rng());
        conv.weight.fill(1.0 / 9.0);
        let x = Array4::from_elem((1, 1, 5, 5), 2.0);
        let y = conv.forward(&x);
        assert_eq!(y.dim(), (1, 1, 3, 3));
        for &v in y.iter() {
            assert!((v - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_input_matches_finite_differences() {
        let conv = Conv2d::new(2, 3, 3, 2, 1, true, &mut test_rng());
        let x = pseudo_input(2, 2, 7, 7);
        let y = conv.forward(&x);
        let gy = Array4::from_elem(y.raw_dim(), 1.0);
        let gx = conv.backward_input(&gy, 7, 7);
        let eps = 1e-3;
        for &(b, c, i, j) in &[(0, 0, 0, 0), (1, 1, 6, 6), (0, 1, 3, 4)] {
            let mut xp = x.clone();
            xp[[b, c, i, j]] += eps;
            let mut xm = x.clone();
            xm[[b, c, i, j]] -= eps;
            let fd = (conv.forward(&xp).sum() - conv.forward(&xm).sum()) / (2.0 * eps);
            assert!(
                (fd - gx[[b, c, i, j]]).abs() < 1e-2,
                "({b},{c},{i},{j}): {fd} vs {}",
                gx[[b, c, i, j]]
            );
        }
    }

    #[test]
    fn param_grads_match_finite_differences() {
        let mut conv = Conv2d::new(2, 2, 3, 1, 1, true, &mut test_rng());
        let x = pseudo_input(1, 2, 6, 6);
        let y = conv.forward(&x);
        let gy = Array4::from_elem(y.raw_dim(), 1.0);
        conv.accumulate_param_grads(&x, &gy);
        let eps = 1e-3;
        for &(co, ci, ki, kj) in &[(0, 0, 0, 0), (1, 1, 2, 2), (0, 1, 1, 0)] {
            let base = conv.weight[[co, ci, ki, kj]];
            conv.weight[[co, ci, ki, kj]] = base + eps;
            let up = conv.forward(&x).sum();
            conv.weight[[co, ci, ki, kj]] = base - eps;
            let down = conv.forward(&x).sum();
            conv.weight[[co, ci, ki, kj]] = base;
            let fd = (up - down) / (2.0 * eps);
            assert!(
                (fd - conv.grad_weight[[co, ci, ki, kj]]).abs() < 1e-2,
                "{fd} vs {}",
                conv.grad_weight[[co, ci, ki, kj]]
            );
        }
    }
}
