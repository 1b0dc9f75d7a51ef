//! Parameter traversal shared by the optimizer, checkpointing, and the
//! isolation tests.

use ndarray::ArrayViewMutD;

/// Callback receiving (name, parameter, gradient) for one tensor.
pub type ParamVisitor<'a> = &'a mut dyn FnMut(&str, ArrayViewMutD<'_, f32>, ArrayViewMutD<'_, f32>);

/// Callback receiving (name, buffer) for one non-trained tensor.
pub type BufferVisitor<'a> = &'a mut dyn FnMut(&str, ArrayViewMutD<'_, f32>);

/// Anything holding trainable parameters.
///
/// Visit order must be deterministic and stable across runs: optimizer state
/// and checkpoints are keyed by the names produced here.
pub trait Params {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>);

    /// Non-trained state that still belongs in checkpoints (e.g. batch-norm
    /// running statistics).
    fn visit_buffers(&mut self, _prefix: &str, _f: BufferVisitor<'_>) {}
}

/// Joins a module path segment onto a prefix.
pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Order-dependent digest of all parameter bits; two networks share a
/// checksum iff their parameters are bitwise identical (up to hash
/// collisions, which the isolation tests can tolerate).
pub fn param_checksum(net: &mut impl Params) -> u64 {
    let mut acc: u64 = 0xcbf29ce484222325;
    net.visit_params("", &mut |_, param, _| {
        for &v in param.iter() {
            acc ^= v.to_bits() as u64;
            acc = acc.wrapping_mul(0x100000001b3);
        }
    });
    acc
}

/// [`param_checksum`] over the non-trained buffers (batch-norm running
/// statistics), for asserting that an operation left them alone.
pub fn buffer_checksum(net: &mut impl Params) -> u64 {
    let mut acc: u64 = 0xcbf29ce484222325;
    net.visit_buffers("", &mut |_, buffer| {
        for &v in buffer.iter() {
            acc ^= v.to_bits() as u64;
            acc = acc.wrapping_mul(0x100000001b3);
        }
    });
    acc
}

/// Total number of trainable scalars.
pub fn param_count(net: &mut impl Params) -> usize {
    let mut n = 0;
    net.visit_params("", &mut |_, param, _| n += param.len());
    n
}

/// Sets every gradient to zero.
pub fn zero_grads(net: &mut impl Params) {
    net.visit_params("", &mut |_, _, mut grad| grad.fill(0.0));
}

/// Names of parameters whose gradient is identically zero — the dead-unit
/// smoke test reports these after a training batch.
pub fn zero_grad_param_names(net: &mut impl Params) -> Vec<String> {
    let mut dead = Vec::new();
    net.visit_params("", &mut |name, _, grad| {
        if grad.iter().all(|&g| g == 0.0) {
            dead.push(name.to_string());
        }
    });
    dead
}
