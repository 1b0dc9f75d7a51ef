//! Elementwise activations with cached backward.
//!
//! ReLU and leaky ReLU keep a multiplicative mask rather than the input:
//! the same mask serves both the ordinary backward pass and the
//! forward-tangent pass used by the gradient penalty (these activations are
//! piecewise linear, so their local behavior is exactly the mask).

use ndarray::{ArrayD, ArrayViewD};

/// ReLU. Returns (output, mask) where mask ∈ {0, 1}.
pub fn relu(x: &ArrayViewD<'_, f32>) -> (ArrayD<f32>, ArrayD<f32>) {
    let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    (x.to_owned() * &mask, mask)
}

/// Leaky ReLU with the given negative slope. Returns (output, mask) where
/// mask ∈ {slope, 1}.
pub fn leaky_relu(x: &ArrayViewD<'_, f32>, slope: f32) -> (ArrayD<f32>, ArrayD<f32>) {
    let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { slope });
    (x.to_owned() * &mask, mask)
}

/// Backward (and tangent-forward) of the masked activations.
pub fn apply_mask(g: &ArrayViewD<'_, f32>, mask: &ArrayD<f32>) -> ArrayD<f32> {
    g.to_owned() * mask
}

/// Tanh. Returns (output, output) — the backward needs only y.
pub fn tanh(x: &ArrayViewD<'_, f32>) -> ArrayD<f32> {
    x.mapv(f32::tanh)
}

/// Backward of tanh given its output y: g·(1 − y²).
pub fn tanh_backward(g: &ArrayViewD<'_, f32>, y: &ArrayViewD<'_, f32>) -> ArrayD<f32> {
    let mut out = g.to_owned();
    out.zip_mut_with(y, |gv, &yv| *gv *= 1.0 - yv * yv);
    out
}

pub fn sigmoid_scalar(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn relu_masks_negatives() {
        let x = arr1(&[-1.0f32, 0.0, 2.5]).into_dyn();
        let (y, mask) = relu(&x.view());
        assert_eq!(y.as_slice().unwrap(), &[0.0, 0.0, 2.5]);
        assert_eq!(mask.as_slice().unwrap(), &[0.0, 0.0, 2.5 / 2.5]);
    }

    #[test]
    fn leaky_relu_scales_negatives() {
        let x = arr1(&[-2.0f32, 3.0]).into_dyn();
        let (y, mask) = leaky_relu(&x.view(), 0.2);
        assert_eq!(y.as_slice().unwrap(), &[-0.4, 3.0]);
        assert_eq!(mask.as_slice().unwrap(), &[0.2, 1.0]);
    }

    #[test]
    fn tanh_backward_uses_one_minus_y_squared() {
        let x = arr1(&[0.5f32]).into_dyn();
        let y = tanh(&x.view());
        let g = arr1(&[2.0f32]).into_dyn();
        let gx = tanh_backward(&g.view(), &y.view());
        let expected = 2.0 * (1.0 - y[[0]] * y[[0]]);
        assert!((gx[[0]] - expected).abs() < 1e-7);
    }
}
