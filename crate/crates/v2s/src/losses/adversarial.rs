//! Wasserstein critic and generator objectives plus the gradient penalty.
//!
//! The critic minimizes `mean D(fake) − mean D(real)` plus a penalty that
//! pulls the norm of its input gradient toward 1 along random interpolants
//! between real and fake samples. The generator maximizes the critic scores
//! of its output, i.e. minimizes their negated mean.

use ndarray::{Array1, Array2, Array3};

use crate::core::SeededRng;
use crate::error::{Error, Result};
use crate::model::{PowerCriticNet, WaveCriticNet};

/// Mean fake score minus mean real score.
///
/// This is the quantity a critic update minimizes (before the gradient
/// penalty is added); it errors on empty or unequal batches.
pub fn critic_loss_from_scores(real: &Array1<f32>, fake: &Array1<f32>) -> Result<f64> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::Shape(format!(
            "critic loss needs nonempty batches, got {} real and {} fake scores",
            real.len(),
            fake.len()
        )));
    }
    if real.len() != fake.len() {
        return Err(Error::Shape(format!(
            "critic loss batch mismatch: {} real vs {} fake scores",
            real.len(),
            fake.len()
        )));
    }
    let mean = |scores: &Array1<f32>| {
        scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64
    };
    Ok(mean(fake) - mean(real))
}

/// [`critic_loss_from_scores`] with the scoring function applied on the spot.
pub fn critic_loss<X>(
    score: impl Fn(&X) -> Result<Array1<f32>>,
    real: &X,
    fake: &X,
) -> Result<f64> {
    critic_loss_from_scores(&score(real)?, &score(fake)?)
}

/// Negated mean critic score of a fake batch — one term of the generator's
/// adversarial objective.
pub fn neg_mean_score(scores: &Array1<f32>) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Shape("adversarial loss needs a nonempty batch".into()));
    }
    Ok(-scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64)
}

/// The generator's adversarial loss: `−mean D_wave(fakes) − mean
/// D_power(fake specs)`, from scores both critics already produced.
pub fn generator_adversarial_loss(
    wave_scores: &Array1<f32>,
    power_scores: &Array1<f32>,
) -> Result<f64> {
    Ok(neg_mean_score(wave_scores)? + neg_mean_score(power_scores)?)
}

/// A batch of waveform interpolants `x̂_i = ε_i·real_i + (1−ε_i)·fake_i`
/// with the drawn mixing coefficients kept for audit.
pub struct InterpolatedWaves {
    pub x_hat: Array2<f32>,
    pub epsilons: Vec<f32>,
}

/// Spectrogram-space counterpart of [`InterpolatedWaves`].
pub struct InterpolatedSpecs {
    pub x_hat: Array3<f32>,
    pub epsilons: Vec<f32>,
}

/// Draws one ε per batch element and mixes the i-th real clip with the i-th
/// fake clip. Every interpolant lies elementwise between its two endpoints.
pub fn interpolate_waves(
    real: &Array2<f32>,
    fake: &Array2<f32>,
    rng: &mut SeededRng,
) -> Result<InterpolatedWaves> {
    if real.dim() != fake.dim() {
        return Err(Error::Shape(format!(
            "cannot interpolate batches of shape {:?} and {:?}",
            real.dim(),
            fake.dim()
        )));
    }
    let epsilons: Vec<f32> = (0..real.dim().0).map(|_| rng.uniform() as f32).collect();
    let mut x_hat = fake.clone();
    for (b, mut row) in x_hat.outer_iter_mut().enumerate() {
        let eps = epsilons[b];
        row.zip_mut_with(&real.row(b), |f, &r| *f = eps * r + (1.0 - eps) * *f);
    }
    Ok(InterpolatedWaves { x_hat, epsilons })
}

/// [`interpolate_waves`] for normalized-spectrogram batches `(B, F, L)`.
pub fn interpolate_specs(
    real: &Array3<f32>,
    fake: &Array3<f32>,
    rng: &mut SeededRng,
) -> Result<InterpolatedSpecs> {
    if real.dim() != fake.dim() {
        return Err(Error::Shape(format!(
            "cannot interpolate batches of shape {:?} and {:?}",
            real.dim(),
            fake.dim()
        )));
    }
    let epsilons: Vec<f32> = (0..real.dim().0).map(|_| rng.uniform() as f32).collect();
    let mut x_hat = fake.clone();
    for (b, mut plane) in x_hat.outer_iter_mut().enumerate() {
        let eps = epsilons[b];
        plane.zip_mut_with(&real.index_axis(ndarray::Axis(0), b), |f, &r| {
            *f = eps * r + (1.0 - eps) * *f;
        });
    }
    Ok(InterpolatedSpecs { x_hat, epsilons })
}

/// `λ · mean((‖g‖ − 1)²)` over per-element input-gradient norms.
///
/// The norms must be finite (a critic whose gradient does not exist has no
/// well-defined penalty) and λ must be non-negative.
pub fn penalty_from_grad_norms(norms: &[f64], lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Config(format!(
            "gradient penalty weight must be ≥ 0, got {lambda}"
        )));
    }
    if norms.is_empty() {
        return Err(Error::Shape("gradient penalty needs a nonempty batch".into()));
    }
    if let Some(bad) = norms.iter().find(|n| !n.is_finite()) {
        return Err(Error::Config(format!(
            "gradient penalty saw a non-finite gradient norm {bad}"
        )));
    }
    let mean =
        norms.iter().map(|&n| (n - 1.0) * (n - 1.0)).sum::<f64>() / norms.len() as f64;
    Ok(lambda * mean)
}

fn row_norms_2d(g: &Array2<f32>) -> Vec<f64> {
    g.outer_iter()
        .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
        .collect()
}

fn row_norms_3d(g: &Array3<f32>) -> Vec<f64> {
    g.outer_iter()
        .map(|plane| plane.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
        .collect()
}

/// Value of the wave critic's gradient penalty at the given interpolants.
pub fn wave_gradient_penalty(
    critic: &WaveCriticNet,
    x_hat: &Array2<f32>,
    lambda: f64,
) -> Result<f64> {
    let (_, cache) = critic.forward(x_hat)?;
    let ones = Array1::ones(x_hat.dim().0);
    let grads = critic.input_grads(&cache, &ones);
    penalty_from_grad_norms(&row_norms_2d(&grads), lambda)
}

/// Value of the power critic's gradient penalty at the given interpolants.
pub fn power_gradient_penalty(
    critic: &PowerCriticNet,
    x_hat: &Array3<f32>,
    lambda: f64,
) -> Result<f64> {
    let (_, cache) = critic.forward(x_hat)?;
    let ones = Array1::ones(x_hat.dim().0);
    let grads = critic.input_grads(&cache, &ones);
    penalty_from_grad_norms(&row_norms_3d(&grads), lambda)
}

/// What one gradient-penalty evaluation produced.
pub struct PenaltyOutcome {
    pub value: f64,
    /// `‖∇_x̂ D(x̂_b)‖₂` per batch element, for logging.
    pub grad_norms: Vec<f64>,
}

/// The per-element chain coefficient `∂GP/∂t_b = 2λ(‖v_b‖−1)/(B·‖v_b‖)`,
/// where `t_b = ⟨v_b, ∂v_b/∂θ⟩`-style tangents carry the parameter
/// dependence. A tiny floor guards the division for an exactly-zero norm.
fn penalty_chain_seed(norms: &[f64], lambda: f64) -> Array1<f32> {
    let batch = norms.len() as f64;
    Array1::from_iter(norms.iter().map(|&n| {
        (2.0 * lambda * (n - 1.0) / (n.max(1e-12) * batch)) as f32
    }))
}

/// Computes the wave critic's gradient penalty **and** accumulates its
/// gradient with respect to the critic's weights.
///
/// Four passes: primal forward (caching activation masks), backward to the
/// input for the per-element gradients `v_b`, a tangent forward pushing `v`
/// through the frozen linear piece, and a backward over that tangent graph
/// seeded with the penalty's chain coefficients. Biases get no gradient —
/// the input gradient of a piecewise-linear critic does not depend on them.
pub fn wave_penalty_with_param_grads(
    critic: &mut WaveCriticNet,
    x_hat: &Array2<f32>,
    lambda: f64,
) -> Result<PenaltyOutcome> {
    let (_, cache) = critic.forward(x_hat)?;
    let ones = Array1::ones(x_hat.dim().0);
    let v = critic.input_grads(&cache, &ones);
    let norms = row_norms_2d(&v);
    let value = penalty_from_grad_norms(&norms, lambda)?;
    let (t, tangent) = critic.tangent_forward(&cache, &v);
    debug_assert!(
        t.iter().zip(&norms).all(|(&tb, &n)| {
            (tb as f64 - n * n).abs() <= 1e-2 * (n * n).max(1e-3)
        }),
        "tangent of own gradient drifted from its squared norm"
    );
    critic.tangent_accumulate_weight_grads(&cache, &tangent, &penalty_chain_seed(&norms, lambda));
    Ok(PenaltyOutcome { value, grad_norms: norms })
}

/// [`wave_penalty_with_param_grads`] for the power critic.
pub fn power_penalty_with_param_grads(
    critic: &mut PowerCriticNet,
    x_hat: &Array3<f32>,
    lambda: f64,
) -> Result<PenaltyOutcome> {
    let (_, cache) = critic.forward(x_hat)?;
    let ones = Array1::ones(x_hat.dim().0);
    let v = critic.input_grads(&cache, &ones);
    let norms = row_norms_3d(&v);
    let value = penalty_from_grad_norms(&norms, lambda)?;
    let (t, tangent) = critic.tangent_forward(&cache, &v);
    debug_assert!(
        t.iter().zip(&norms).all(|(&tb, &n)| {
            (tb as f64 - n * n).abs() <= 1e-2 * (n * n).max(1e-3)
        }),
        "tangent of own gradient drifted from its squared norm"
    );
    critic.tangent_accumulate_weight_grads(&cache, &tangent, &penalty_chain_seed(&norms, lambda));
    Ok(PenaltyOutcome { value, grad_norms: norms })
}
