//! The two optimizer steps of adversarial training.
//!
//! [`critic_update`] takes one Adam step on each enabled critic, minimizing
//! the Wasserstein critic loss plus its gradient penalty; the generator
//! supplies fakes but is never touched. [`generator_update`] takes one Adam
//! step on the generator against the full four-term objective; the critics
//! only score and differentiate, their parameters stay frozen.
//!
//! Both operations abort with a named term the moment any loss value stops
//! being finite — unnormalized WGAN critics can diverge, and skipping the
//! bad step would hide it.

use ndarray::{Array1, Array2, Array3, Array4};

use crate::core::{SeededRng, Waveform, SAMPLE_RATE};
use crate::dsp::stft::LOG_FLOOR;
use crate::dsp::{
    log_power_backward, log_power_from_re_im, normalize_backward, normalize_for_critic,
    NormalizeCache, StftPlan,
};
use crate::error::{Error, Result};
use crate::losses::{
    critic_loss_from_scores, interpolate_specs, interpolate_waves, mfcc_loss_with_grad,
    neg_mean_score, pase_loss_with_grad, power_loss_with_grad, total_generator_loss, LossParts,
    LossToggles, PerceptualExtractor,
};
use crate::model::GeneratorNet;
use crate::nn::{zero_grads, BnMode};
use crate::training::state::{window_samples, TrainState};

/// What one critic update reports. `None` means the critic is disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticMetrics {
    pub wave_loss: Option<f64>,
    pub wave_gp: Option<f64>,
    pub power_loss: Option<f64>,
    pub power_gp: Option<f64>,
    /// True when every critic was disabled and the update was a no-op.
    pub skipped: bool,
}

/// Raw loss parts (unweighted) and the weighted total of one generator step.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMetrics {
    pub adversarial: f64,
    pub perceptual: f64,
    pub power: f64,
    pub mfcc: f64,
    pub total: f64,
}

/// Runs the generator over a clip batch without updating batch-norm running
/// statistics, leaving it bitwise identical — this is how critic updates get
/// their fakes.
pub fn synthesize_batch(generator: &mut GeneratorNet, videos: &Array4<f32>) -> Array2<f32> {
    generator.forward_train(videos, BnMode::TrainNoUpdate).0
}

fn ensure_finite_waves(waves: &Array2<f32>, term: &str, step: u64) -> Result<()> {
    if waves.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: term.to_string(),
            step,
        });
    }
    Ok(())
}

fn ensure_finite(value: f64, term: &str, step: u64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            term: term.to_string(),
            step,
        });
    }
    Ok(value)
}

/// One aligned clip window per batch row, plus where each was cut.
struct WindowedBatch {
    real: Array2<f32>,
    fake: Array2<f32>,
    starts: Vec<usize>,
}

/// Cuts the same random window out of each (real, fake) row pair.
fn cut_windows(
    real_full: &Array2<f32>,
    fake_full: &Array2<f32>,
    rng: &mut SeededRng,
    clip_seconds: f64,
) -> Result<WindowedBatch> {
    let (batch, _) = real_full.dim();
    let target = (clip_seconds * SAMPLE_RATE as f64).round() as usize;
    let mut real = Array2::zeros((batch, target));
    let mut fake = Array2::zeros((batch, target));
    let mut starts = Vec::with_capacity(batch);
    for b in 0..batch {
        let real_row = Waveform::new(real_full.row(b).to_vec(), SAMPLE_RATE)?;
        let fake_row = Waveform::new(fake_full.row(b).to_vec(), SAMPLE_RATE)?;
        let window =
            crate::data::sample_clip_window(&real_row, &fake_row, rng, clip_seconds)?;
        real.row_mut(b)
            .iter_mut()
            .zip(window.real.samples())
            .for_each(|(dst, &s)| *dst = s);
        fake.row_mut(b)
            .iter_mut()
            .zip(window.fake.samples())
            .for_each(|(dst, &s)| *dst = s);
        starts.push(window.start);
    }
    Ok(WindowedBatch { real, fake, starts })
}

/// Per-row STFT state retained for backpropagation through the power
/// critic's input spectrograms.
struct SpecRowCache {
    re: ndarray::Array2<f64>,
    im: ndarray::Array2<f64>,
    norm: NormalizeCache,
}

fn batch_specs(
    plan: &StftPlan,
    waves: &Array2<f32>,
    with_caches: bool,
) -> Result<(Array3<f32>, Vec<SpecRowCache>)> {
    let (batch, len) = waves.dim();
    let (bins, frames) = (plan.num_bins(), plan.num_frames(len)?);
    let mut specs = Array3::zeros((batch, bins, frames));
    let mut caches = Vec::new();
    for b in 0..batch {
        let samples: Vec<f64> = waves.row(b).iter().map(|&s| s as f64).collect();
        let (re, im) = plan.re_im(&samples)?;
        let logpow = log_power_from_re_im(&re, &im, LOG_FLOOR);
        let (normalized, norm) = normalize_for_critic(&logpow);
        for ((i, j), &v) in normalized.values().indexed_iter() {
            specs[[b, i, j]] = v as f32;
        }
        if with_caches {
            caches.push(SpecRowCache { re, im, norm });
        }
    }
    Ok((specs, caches))
}

/// Adjoint of one row of [`batch_specs`]: spectrogram gradient back to
/// window-sample gradient.
fn spec_grad_to_samples(
    plan: &StftPlan,
    cache: &SpecRowCache,
    g_spec: ndarray::ArrayView2<'_, f32>,
    len: usize,
) -> Vec<f64> {
    let g64 = g_spec.mapv(|v| v as f64);
    let g_logpow = normalize_backward(&cache.norm, &g64);
    let (g_re, g_im) = log_power_backward(&cache.re, &cache.im, LOG_FLOOR, &g_logpow);
    plan.grad_to_samples(g_re.view(), g_im.view(), len)
}

/// One Adam step on each enabled critic, minimizing
/// `mean D(fake) − mean D(real) + λ·GP` on aligned clip windows cut from
/// the full batches. The generator is not consulted at all — fakes arrive
/// pre-synthesized and detached.
///
/// With every critic disabled this is a counted no-op flagged in the
/// metrics, so ablation runs keep the 6:1 schedule bookkeeping intact.
pub fn critic_update(
    state: &mut TrainState,
    real_full: &Array2<f32>,
    fake_full: &Array2<f32>,
) -> Result<CriticMetrics> {
    let step = state.critic_step + 1;
    if !state.config.enable_wave_critic && !state.config.enable_power_critic {
        state.critic_step = step;
        return Ok(CriticMetrics {
            wave_loss: None,
            wave_gp: None,
            power_loss: None,
            power_gp: None,
            skipped: true,
        });
    }
    ensure_finite_waves(fake_full, "synthesized waveform", step)?;

    let batch = real_full.dim().0;
    let windows = cut_windows(
        real_full,
        fake_full,
        &mut state.rngs.clip_window,
        state.config.clip_seconds,
    )?;
    let lambda = state.config.loss_weights.gp_lambda;
    let seed_real = Array1::from_elem(batch, -1.0 / batch as f32);
    let seed_fake = Array1::from_elem(batch, 1.0 / batch as f32);

    let mut metrics = CriticMetrics {
        wave_loss: None,
        wave_gp: None,
        power_loss: None,
        power_gp: None,
        skipped: false,
    };

    if state.config.enable_wave_critic {
        let (s_real, c_real) = state.wave_critic.forward(&windows.real)?;
        let (s_fake, c_fake) = state.wave_critic.forward(&windows.fake)?;
        let loss = critic_loss_from_scores(&s_real, &s_fake)?;
        ensure_finite(loss, "wave critic loss", step)?;

        zero_grads(&mut state.wave_critic);
        state.wave_critic.accumulate_param_grads(&c_real, &seed_real);
        state.wave_critic.accumulate_param_grads(&c_fake, &seed_fake);
        let interp =
            interpolate_waves(&windows.real, &windows.fake, &mut state.rngs.gp_wave)?;
        let penalty = crate::losses::wave_penalty_with_param_grads(
            &mut state.wave_critic,
            &interp.x_hat,
            lambda,
        )?;
        ensure_finite(penalty.value, "wave gradient penalty", step)?;
        state.wave_opt.step(&mut state.wave_critic);
        metrics.wave_loss = Some(loss);
        metrics.wave_gp = Some(penalty.value);
    }

    if state.config.enable_power_critic {
        let (spec_real, _) = batch_specs(&state.stft, &windows.real, false)?;
        let (spec_fake, _) = batch_specs(&state.stft, &windows.fake, false)?;
        let (s_real, c_real) = state.power_critic.forward(&spec_real)?;
        let (s_fake, c_fake) = state.power_critic.forward(&spec_fake)?;
        let loss = critic_loss_from_scores(&s_real, &s_fake)?;
        ensure_finite(loss, "power critic loss", step)?;

        zero_grads(&mut state.power_critic);
        state.power_critic.accumulate_param_grads(&c_real, &seed_real);
        state.power_critic.accumulate_param_grads(&c_fake, &seed_fake);
        let interp = interpolate_specs(&spec_real, &spec_fake, &mut state.rngs.gp_power)?;
        let penalty = crate::losses::power_penalty_with_param_grads(
            &mut state.power_critic,
            &interp.x_hat,
            lambda,
        )?;
        ensure_finite(penalty.value, "power gradient penalty", step)?;
        state.power_opt.step(&mut state.power_critic);
        metrics.power_loss = Some(loss);
        metrics.power_gp = Some(penalty.value);
    }

    state.critic_step = step;
    Ok(metrics)
}

/// One Adam step on the generator against the weighted four-term objective.
///
/// Adversarial terms score a freshly synthesized clip window (waveform
/// critic) and its normalized spectrogram (power critic); the perceptual,
/// power, and MFCC reconstruction losses compare the entire utterances.
/// Critic parameters are read, never written.
pub fn generator_update(
    state: &mut TrainState,
    videos: &Array4<f32>,
    real_full: &Array2<f32>,
) -> Result<GenMetrics> {
    let step = state.gen_step + 1;
    let toggles = LossToggles::from_config(&state.config);
    let weights = state.config.loss_weights;

    let (fake_full, cache) = state
        .generator
        .forward_train(videos, BnMode::TrainUpdate);
    ensure_finite_waves(&fake_full, "synthesized waveform", step)?;
    assert_eq!(real_full.dim(), fake_full.dim(), "audio/video batch mismatch");

    let (batch, full_len) = fake_full.dim();
    let mut d_wave = Array2::<f32>::zeros((batch, full_len));
    let mut parts = LossParts {
        adversarial: 0.0,
        perceptual: 0.0,
        power: 0.0,
        mfcc: 0.0,
    };

    if toggles.adversarial {
        let windows = cut_windows(
            real_full,
            &fake_full,
            &mut state.rngs.clip_window,
            state.config.clip_seconds,
        )?;
        let win_len = window_samples(&state.config);
        let seed = Array1::from_elem(batch, -1.0 / batch as f32);
        // Scatter a window-sample gradient back into the full waveform; the
        // zero-padded tail of a short clip has nowhere to go and is dropped.
        let scatter = |d_wave: &mut Array2<f32>, b: usize, g: &dyn Fn(usize) -> f32| {
            let start = windows.starts[b];
            let copy = win_len.min(full_len - start);
            for i in 0..copy {
                d_wave[[b, start + i]] += weights.alpha_adv as f32 * g(i);
            }
        };

        if state.config.enable_wave_critic {
            let (scores, wcache) = state.wave_critic.forward(&windows.fake)?;
            parts.adversarial += neg_mean_score(&scores)?;
            let g_win = state.wave_critic.input_grads(&wcache, &seed);
            for b in 0..batch {
                scatter(&mut d_wave, b, &|i| g_win[[b, i]]);
            }
        }
        if state.config.enable_power_critic {
            let (spec_fake, row_caches) = batch_specs(&state.stft, &windows.fake, true)?;
            let (scores, pcache) = state.power_critic.forward(&spec_fake)?;
            parts.adversarial += neg_mean_score(&scores)?;
            let g_spec = state.power_critic.input_grads(&pcache, &seed);
            for b in 0..batch {
                let g_samples = spec_grad_to_samples(
                    &state.stft,
                    &row_caches[b],
                    g_spec.index_axis(ndarray::Axis(0), b),
                    win_len,
                );
                scatter(&mut d_wave, b, &|i| g_samples[i] as f32);
            }
        }
        ensure_finite(parts.adversarial, "adversarial loss", step)?;
    }

    // Reconstruction terms compare full utterances, averaged over the batch.
    let accumulate_term = |d_wave: &mut Array2<f32>,
                               parts_slot: &mut f64,
                               term: &str,
                               alpha: f64,
                               f: &dyn Fn(&Waveform, &Waveform) -> Result<(f64, Vec<f32>)>|
     -> Result<()> {
        let mut mean = 0.0;
        for b in 0..batch {
            let real = Waveform::new(real_full.row(b).to_vec(), SAMPLE_RATE)?;
            let fake = Waveform::new(fake_full.row(b).to_vec(), SAMPLE_RATE)?;
            let (value, grad) = f(&real, &fake)?;
            mean += value / batch as f64;
            let scale = (alpha / batch as f64) as f32;
            d_wave
                .row_mut(b)
                .iter_mut()
                .zip(grad)
                .for_each(|(dst, g)| *dst += scale * g);
        }
        *parts_slot = ensure_finite(mean, term, step)?;
        Ok(())
    };

    if toggles.perceptual {
        let extractor = &state.extractor;
        accumulate_term(
            &mut d_wave,
            &mut parts.perceptual,
            "perceptual loss",
            weights.alpha_pase,
            &|real, fake| pase_loss_with_grad(extractor as &dyn PerceptualExtractor, real, fake),
        )?;
    }
    if toggles.power {
        accumulate_term(
            &mut d_wave,
            &mut parts.power,
            "power loss",
            weights.alpha_power,
            &power_loss_with_grad,
        )?;
    }
    if toggles.mfcc {
        accumulate_term(
            &mut d_wave,
            &mut parts.mfcc,
            "mfcc loss",
            weights.alpha_mfcc,
            &mfcc_loss_with_grad,
        )?;
    }

    let total = ensure_finite(
        total_generator_loss(&weights, &parts, &toggles),
        "total generator loss",
        step,
    )?;

    zero_grads(&mut state.generator);
    state.generator.backward(&cache, &d_wave);
    state.gen_opt.step(&mut state.generator);
    state.gen_step = step;
    state.push_loss(total);

    Ok(GenMetrics {
        adversarial: parts.adversarial,
        perceptual: parts.perceptual,
        power: parts.power,
        mfcc: parts.mfcc,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::config::TrainConfig;
    use crate::losses::fallback_extractor;
    use crate::nn::{buffer_checksum, param_checksum};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            model_width_scale: 0.125,
            clip_seconds: 0.08, // 1280-sample windows
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    fn tiny_state(config: TrainConfig) -> TrainState {
        TrainState::new(config).unwrap()
    }

    /// Batch of 2 clips × `t` frames with deterministic content: videos in
    /// [0, 1], audio a mix of two sines.
    fn tiny_batch(t: usize) -> (Array4<f32>, Array2<f32>) {
        let videos = Array4::from_shape_fn((2, t, 96, 96), |(b, ti, i, j)| {
            ((b * 37 + ti * 17 + i * 5 + j * 3) % 101) as f32 / 100.0
        });
        let len = t * crate::core::SAMPLES_PER_FRAME;
        let real = Array2::from_shape_fn((2, len), |(b, i)| {
            let hz = if b == 0 { 330.0 } else { 710.0 };
            0.4 * (2.0 * std::f32::consts::PI * hz * i as f32 / 16_000.0).sin()
        });
        (videos, real)
    }

    #[test]
    fn critic_update_leaves_generator_bitwise_unchanged() {
        let mut state = tiny_state(tiny_config());
        let (videos, real) = tiny_batch(2);
        let params_before = param_checksum(&mut state.generator);
        let buffers_before = buffer_checksum(&mut state.generator);
        let fake = synthesize_batch(&mut state.generator, &videos);
        critic_update(&mut state, &real, &fake).unwrap();
        assert_eq!(param_checksum(&mut state.generator), params_before);
        assert_eq!(buffer_checksum(&mut state.generator), buffers_before);
        assert_eq!(state.gen_opt.t, 0);
    }

    #[test]
    fn critic_update_takes_exactly_one_step_per_enabled_critic() {
        let mut state = tiny_state(tiny_config());
        let (videos, real) = tiny_batch(2);
        let fake = synthesize_batch(&mut state.generator, &videos);
        let metrics = critic_update(&mut state, &real, &fake).unwrap();
        assert_eq!(state.wave_opt.t, 1);
        assert_eq!(state.power_opt.t, 1);
        assert_eq!(state.critic_step, 1);
        assert!(!metrics.skipped);
        assert!(metrics.wave_loss.is_some() && metrics.power_loss.is_some());
        assert!(metrics.wave_gp.unwrap() >= 0.0);
        assert!(metrics.power_gp.unwrap() >= 0.0);
    }

    #[test]
    fn disabled_critics_make_the_update_a_counted_noop() {
        let mut state = tiny_state(TrainConfig {
            enable_wave_critic: false,
            enable_power_critic: false,
            ..tiny_config()
        });
        let (videos, real) = tiny_batch(2);
        let fake = synthesize_batch(&mut state.generator, &videos);
        let wave_before = param_checksum(&mut state.wave_critic);
        let power_before = param_checksum(&mut state.power_critic);
        let metrics = critic_update(&mut state, &real, &fake).unwrap();
        assert!(metrics.skipped);
        assert_eq!(metrics.wave_loss, None);
        assert_eq!(metrics.power_loss, None);
        assert_eq!(state.critic_step, 1, "schedule bookkeeping continues");
        assert_eq!(state.wave_opt.t, 0);
        assert_eq!(state.power_opt.t, 0);
        assert_eq!(param_checksum(&mut state.wave_critic), wave_before);
        assert_eq!(param_checksum(&mut state.power_critic), power_before);
    }

    #[test]
    fn critic_losses_decrease_on_a_fixed_batch() {
        // Frozen generator, fixed real/fake pair: fifty updates must leave
        // each critic better at separating them than it started.
        let mut state = tiny_state(tiny_config());
        let (videos, real) = tiny_batch(2);
        let fake = synthesize_batch(&mut state.generator, &videos);
        let first = critic_update(&mut state, &real, &fake).unwrap();
        let mut last = first.clone();
        for _ in 0..49 {
            last = critic_update(&mut state, &real, &fake).unwrap();
        }
        assert!(
            last.wave_loss.unwrap() < first.wave_loss.unwrap(),
            "wave critic loss went {} -> {}",
            first.wave_loss.unwrap(),
            last.wave_loss.unwrap()
        );
        assert!(
            last.power_loss.unwrap() < first.power_loss.unwrap(),
            "power critic loss went {} -> {}",
            first.power_loss.unwrap(),
            last.power_loss.unwrap()
        );
    }

    #[test]
    fn generator_update_leaves_critics_bitwise_unchanged() {
        let mut state = tiny_state(tiny_config());
        let (videos, real) = tiny_batch(2);
        let wave_before = param_checksum(&mut state.wave_critic);
        let power_before = param_checksum(&mut state.power_critic);
        let metrics = generator_update(&mut state, &videos, &real).unwrap();
        assert_eq!(param_checksum(&mut state.wave_critic), wave_before);
        assert_eq!(param_checksum(&mut state.power_critic), power_before);
        assert_eq!(state.wave_opt.t, 0);
        assert_eq!(state.power_opt.t, 0);
        assert_eq!(state.gen_opt.t, 1);
        assert_eq!(state.gen_step, 1);
        assert_eq!(state.loss_history, vec![metrics.total]);
        for part in [metrics.perceptual, metrics.power, metrics.mfcc] {
            assert!(part > 0.0, "untrained reconstruction losses are positive");
        }
    }

    #[test]
    fn lone_mfcc_term_scales_by_its_weight() {
        let mut state = tiny_state(TrainConfig {
            enable_wave_critic: false,
            enable_power_critic: false,
            enable_pase_loss: false,
            enable_power_loss: false,
            ..tiny_config()
        });
        let (videos, real) = tiny_batch(2);
        let metrics = generator_update(&mut state, &videos, &real).unwrap();
        assert_eq!(metrics.adversarial, 0.0);
        assert_eq!(metrics.perceptual, 0.0);
        assert_eq!(metrics.power, 0.0);
        assert_eq!(metrics.total, 0.4 * metrics.mfcc);
    }

    #[test]
    fn disabled_perceptual_term_ignores_the_extractor_entirely() {
        // Two runs differing only in the (disabled) extractor must produce
        // bitwise-identical generator trajectories.
        let config = TrainConfig {
            enable_pase_loss: false,
            ..tiny_config()
        };
        let (videos, real) = tiny_batch(2);
        let mut a = tiny_state(config.clone());
        let mut b = tiny_state(config);
        b.extractor = fallback_extractor(12345);
        generator_update(&mut a, &videos, &real).unwrap();
        generator_update(&mut b, &videos, &real).unwrap();
        assert_eq!(
            param_checksum(&mut a.generator),
            param_checksum(&mut b.generator)
        );
    }

    #[test]
    fn nonfinite_fakes_abort_with_a_named_term() {
        let mut state = tiny_state(tiny_config());
        let (videos, real) = tiny_batch(2);
        let mut fake = synthesize_batch(&mut state.generator, &videos);
        fake[[1, 7]] = f32::NAN;
        let err = critic_update(&mut state, &real, &fake).unwrap_err();
        match &err {
            Error::NonFinite { term, step } => {
                assert!(term.contains("waveform"), "{term}");
                assert_eq!(*step, 1);
            }
            other => panic!("expected NonFinite, got {other}"),
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn repeated_updates_reproduce_bitwise_across_runs() {
        let run = || {
            let mut state = tiny_state(tiny_config());
            let (videos, real) = tiny_batch(2);
            for _ in 0..2 {
                let fake = synthesize_batch(&mut state.generator, &videos);
                critic_update(&mut state, &real, &fake).unwrap();
            }
            let gen = generator_update(&mut state, &videos, &real).unwrap();
            (
                param_checksum(&mut state.generator),
                param_checksum(&mut state.wave_critic),
                param_checksum(&mut state.power_critic),
                gen,
            )
        };
        let (g1, w1, p1, m1) = run();
        let (g2, w2, p2, m2) = run();
        assert_eq!(g1, g2);
        assert_eq!(w1, w2);
        assert_eq!(p1, p2);
        assert_eq!(m1, m2);
    }
}
