//! Fully connected layer.

use ndarray::{Array1, Array2};

use crate::core::SeededRng;
use crate::nn::init::uniform_fan_in;
use crate::nn::module::{join, ParamVisitor, Params};

pub struct Linear {
    pub weight: Array2<f32>, // (out, in)
    pub bias: Array1<f32>,
    pub grad_weight: Array2<f32>,
    pub grad_bias: Array1<f32>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut SeededRng) -> Self {
        Linear {
            weight: uniform_fan_in((out_features, in_features), in_features, rng),
            bias: uniform_fan_in(out_features, in_features, rng),
            grad_weight: Array2::zeros((out_features, in_features)),
            grad_bias: Array1::zeros(out_features),
        }
    }

    /// x: (batch, in) → (batch, out).
    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Same product without the bias — the tangent pass of an affine map.
    pub fn forward_nobias(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.weight.t())
    }

    pub fn backward_input(&self, gy: &Array2<f32>) -> Array2<f32> {
        gy.dot(&self.weight)
    }

    pub fn accumulate_param_grads(&mut self, x: &Array2<f32>, gy: &Array2<f32>) {
        self.grad_weight += &gy.t().dot(x);
        self.grad_bias += &gy.sum_axis(ndarray::Axis(0));
    }

    pub fn accumulate_weight_grad_only(&mut self, x: &Array2<f32>, gy: &Array2<f32>) {
        self.grad_weight += &gy.t().dot(x);
    }
}

impl Params for Linear {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        f(
            &join(prefix, "weight"),
            self.weight.view_mut().into_dyn(),
            self.grad_weight.view_mut().into_dyn(),
        );
        f(
            &join(prefix, "bias"),
            self.bias.view_mut().into_dyn(),
            self.grad_bias.view_mut().into_dyn(),
        );
    }
}
