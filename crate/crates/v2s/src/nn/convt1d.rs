//! Transposed 1-D convolution (fractionally-strided upsampling).
//!
//! Output length is (L−1)·stride − 2·padding + kernel. The decoder chooses
//! kernel/padding pairs for which this is exactly L·stride.

use ndarray::{s, Array1, Array2, Array3};

use crate::core::SeededRng;
use crate::nn::gather::{gather_tap, scatter_tap_add, tap_range};
use crate::nn::init::uniform_fan_in;
use crate::nn::module::{join, ParamVisitor, Params};

pub struct ConvTranspose1d {
    pub weight: Array3<f32>, // (in_ch, out_ch, kernel)
    pub bias: Option<Array1<f32>>,
    pub grad_weight: Array3<f32>,
    pub grad_bias: Option<Array1<f32>>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        with_bias: bool,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = in_ch * kernel / stride; // effective contributors per output sample
        ConvTranspose1d {
            weight: uniform_fan_in((in_ch, out_ch, kernel), fan_in.max(1), rng),
            bias: with_bias.then(|| uniform_fan_in(out_ch, fan_in.max(1), rng)),
            grad_weight: Array3::zeros((in_ch, out_ch, kernel)),
            grad_bias: with_bias.then(|| Array1::zeros(out_ch)),
            stride,
            padding,
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        let k = self.weight.dim().2;
        (in_len - 1) * self.stride + k - 2 * self.padding
    }

    /// x: (batch, in_ch, len) → (batch, out_ch, out_len).
    pub fn forward(&self, x: &Array3<f32>) -> Array3<f32> {
        let (batch, in_ch, in_len) = x.dim();
        let (w_in, out_ch, k) = self.weight.dim();
        assert_eq!(in_ch, w_in, "conv_transpose1d input channels");
        let out_len = self.out_len(in_len);
        let w_flat = self
            .weight
            .view()
            .into_shape_with_order((in_ch, out_ch * k))
            .expect("weight is contiguous");
        let mut y = Array3::zeros((batch, out_ch, out_len));
        for b in 0..batch {
            let x_b = x.slice(s![b, .., ..]); // (in_ch, in_len)
            // Every (output-channel, kernel-tap) pair for every input position.
            let contrib = w_flat.t().dot(&x_b); // (out_ch·k, in_len)
            for co in 0..out_ch {
                let mut dst = y.slice_mut(s![b, co, ..]);
                let dst = dst.as_slice_mut().expect("output row is contiguous");
                for ki in 0..k {
                    let Some(range) = tap_range(self.stride, self.padding, ki, out_len, in_len)
                    else {
                        continue;
                    };
                    let row = contrib.row(co * k + ki);
                    let row = row.to_slice().expect("contrib row is contiguous");
                    scatter_tap_add(dst, row, self.stride, range);
                }
            }
        }
        if let Some(bias) = &self.bias {
            for b in 0..batch {
                for co in 0..out_ch {
                    let mut row = y.slice_mut(s![b, co, ..]);
                    row += bias[co];
                }
            }
        }
        y
    }

    /// Gathers gy into (out_ch·k, in_len) layout: entry (co·k+ki, l) is the
    /// output-gradient at the position input l writes through tap ki.
    fn gather_gy(&self, gy: &Array3<f32>, b: usize, in_len: usize) -> Array2<f32> {
        let (_, out_ch, k) = self.weight.dim();
        let out_len = gy.dim().2;
        let mut col = Array2::zeros((out_ch * k, in_len));
        for co in 0..out_ch {
            let src = gy.slice(s![b, co, ..]);
            let src = src.to_slice().expect("grad row is contiguous");
            for ki in 0..k {
                let Some(range) = tap_range(self.stride, self.padding, ki, out_len, in_len)
                else {
                    continue;
                };
                let row = col.row_mut(co * k + ki);
                let dst = row.into_slice().expect("col row is contiguous");
                gather_tap(dst, src, self.stride, range);
            }
        }
        col
    }

    pub fn backward_input(&self, gy: &Array3<f32>, in_len: usize) -> Array3<f32> {
        let (batch, _, _) = gy.dim();
        let (in_ch, out_ch, k) = self.weight.dim();
        let w_flat = self
            .weight
            .view()
            .into_shape_with_order((in_ch, out_ch * k))
            .expect("weight is contiguous");
        let mut gx = Array3::zeros((batch, in_ch, in_len));
        for b in 0..batch {
            let col = self.gather_gy(gy, b, in_len);
            let gx_b = w_flat.dot(&col); // (in_ch, in_len)
            gx.slice_mut(s![b, .., ..]).assign(&gx_b);
        }
        gx
    }

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

    pub fn accumulate_weight_grads_only(&mut self, x: &Array3<f32>, gy: &Array3<f32>) {
        let (batch, in_ch, in_len) = x.dim();
        let (_, out_ch, k) = self.weight.dim();
        let mut acc = Array2::<f32>::zeros((in_ch, out_ch * k));
        for b in 0..batch {
            let col = self.gather_gy(gy, b, in_len);
            let x_b = x.slice(s![b, .., ..]);
            acc += &x_b.dot(&col.t()); // (in_ch, out_ch·k)
        }
        let mut gw_flat = self
            .grad_weight
            .view_mut()
            .into_shape_with_order((in_ch, out_ch * k))
            .expect("grad weight is contiguous");
        gw_flat += &acc;
    }
}

impl Params for ConvTranspose1d {
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
        SeededRng::new(23, streams::INIT_GENERATOR)
    }

    #[test]
    fn decoder_ladder_lengths_multiply_exactly() {
        let rng = &mut test_rng();
        let specs = [(15usize, 5usize, 5usize), (8, 4, 2), (8, 4, 2), (8, 4, 2), (4, 2, 1), (4, 2, 1)];
        let mut len = 1usize;
        for &(k, s, p) in &specs {
            let layer = ConvTranspose1d::new(1, 1, k, s, p, true, rng);
            len = layer.out_len(len);
        }
        assert_eq!(len, 1280);
        // And for longer inputs the factor still holds.
        let layer = ConvTranspose1d::new(1, 1, 8, 4, 2, true, rng);
        assert_eq!(layer.out_len(25), 100);
    }

    #[test]
    fn known_tiny_upsampling() {
        // stride 2, kernel 2, no padding: input [a, b] → [w0·a, w1·a, w0·b, w1·b].
        let mut layer = ConvTranspose1d::new(1, 1, 2, 2, 0, false, &mut test_rng());
        layer.weight[[0, 0, 0]] = 3.0;
        layer.weight[[0, 0, 1]] = 5.0;
        let x = Array3::from_shape_vec((1, 1, 2), vec![1.0, 2.0]).unwrap();
        let y = layer.forward(&x);
        assert_eq!(y.as_slice().unwrap(), &[3.0, 5.0, 6.0, 10.0]);
    }

    #[test]
    fn overlapping_taps_sum() {
        // stride 1, kernel 2: y[1] receives x[0]·w1 + x[1]·w0.
        let mut layer = ConvTranspose1d::new(1, 1, 2, 1, 0, false, &mut test_rng());
        layer.weight[[0, 0, 0]] = 1.0;
        layer.weight[[0, 0, 1]] = 10.0;
        let x = Array3::from_shape_vec((1, 1, 2), vec![1.0, 2.0]).unwrap();
        let y = layer.forward(&x);
        assert_eq!(y.as_slice().unwrap(), &[1.0, 12.0, 20.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut layer = ConvTranspose1d::new(3, 2, 8, 4, 2, true, &mut test_rng());
        let x = Array3::from_shape_fn((2, 3, 5), |(b, c, l)| {
            (((b * 7 + c * 3 + l) % 13) as f32 / 13.0) - 0.5
        });
        let y = layer.forward(&x);
        let gy = Array3::from_elem(y.raw_dim(), 1.0);
        let gx = layer.backward_input(&gy, 5);
        layer.accumulate_param_grads(&x, &gy);
        let eps = 1e-3;
        for &(b, c, l) in &[(0, 0, 0), (1, 2, 4), (0, 1, 2)] {
            let mut xp = x.clone();
            xp[[b, c, l]] += eps;
            let mut xm = x.clone();
            xm[[b, c, l]] -= eps;
            let fd = (layer.forward(&xp).sum() - layer.forward(&xm).sum()) / (2.0 * eps);
            assert!(
                (fd - gx[[b, c, l]]).abs() < 1e-2,
                "({b},{c},{l}): {fd} vs {}",
                gx[[b, c, l]]
            );
        }
        for &(ci, co, k) in &[(0, 0, 0), (2, 1, 7), (1, 0, 3)] {
            let base = layer.weight[[ci, co, k]];
            layer.weight[[ci, co, k]] = base + eps;
            let up = layer.forward(&x).sum();
            layer.weight[[ci, co, k]] = base - eps;
            let down = layer.forward(&x).sum();
            layer.weight[[ci, co, k]] = base;
            let fd = (up - down) / (2.0 * eps);
            assert!(
                (fd - layer.grad_weight[[ci, co, k]]).abs() < 1e-2,
                "({ci},{co},{k}): {fd} vs {}",
                layer.grad_weight[[ci, co, k]]
            );
        }
    }
}
