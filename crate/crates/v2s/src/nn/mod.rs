//! A small hand-rolled neural-network toolkit (f32, CPU, ndarray-backed).
//!
//! Layers own their parameters and gradient accumulators. Forward passes are
//! `&self` and return whatever cache their backward needs; backward passes
//! split into a pure input-gradient half and a parameter-gradient half so
//! the gradient penalty can run backward passes without touching parameter
//! state. Heavy lifting (conv im2col products, GRU gate batches) reduces to
//! matrix multiplication through ndarray's `dot`.

pub mod act;
pub mod adam;
pub mod batchnorm;
pub mod conv1d;
pub mod conv2d;
pub mod convt1d;
mod gather;
pub mod gru;
pub mod init;
pub mod linear;
pub mod module;
pub mod pool;

pub use act::{apply_mask, leaky_relu, relu, tanh, tanh_backward};
pub use adam::Adam;
pub use batchnorm::{BatchNorm, BnCache, BnMode};
pub use conv1d::{clamp_groups, Conv1d};
pub use conv2d::Conv2d;
pub use convt1d::ConvTranspose1d;
pub use gru::{BiGru, BiGruStack, BiGruStackCache, GruDirection};
pub use linear::Linear;
pub use module::{
    buffer_checksum, join, param_checksum, param_count, zero_grad_param_names, zero_grads,
    BufferVisitor, ParamVisitor, Params,
};
pub use pool::{global_avg_pool, global_avg_pool_backward, MaxPool2d, MaxPoolCache};
