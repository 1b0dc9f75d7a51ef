//! Weight initialization.

use ndarray::{Array, Dimension, ShapeBuilder};

use crate::core::SeededRng;

/// Uniform(-bound, bound) with bound = 1/√fan_in — the standard conv/linear
/// default that keeps activation scale roughly constant at init.
pub fn uniform_fan_in<D: Dimension, Sh: ShapeBuilder<Dim = D>>(
    shape: Sh,
    fan_in: usize,
    rng: &mut SeededRng,
) -> Array<f32, D> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array::from_shape_simple_fn(shape, || rng.uniform_in(-bound, bound) as f32)
}
