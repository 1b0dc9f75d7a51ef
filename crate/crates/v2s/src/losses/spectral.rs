//! L1 reconstruction losses in log-power-spectrum and MFCC space.
//!
//! Both losses run the f64 analysis pipeline from [`crate::dsp`] and come
//! with exact gradients with respect to the synthesized waveform, chained
//! through the log/floor, the (mel, DCT) stages where present, and the
//! windowed-DFT adjoint.

use ndarray::Array2;

use crate::core::Waveform;
use crate::dsp::{
    log_power_backward, log_power_from_re_im, MfccParams, MfccPlan, StftParams, StftPlan,
    LOG_FLOOR,
};
use crate::error::{Error, Result};

fn check_paired(x: &Waveform, x_tilde: &Waveform) -> Result<()> {
    if x.sample_rate() != x_tilde.sample_rate() {
        return Err(Error::Shape(format!(
            "waveforms have sample rates {} and {} Hz; spectral losses need them equal",
            x.sample_rate(),
            x_tilde.sample_rate()
        )));
    }
    if x.len() != x_tilde.len() {
        return Err(Error::Shape(format!(
            "waveforms have {} and {} samples; spectral losses need equal lengths",
            x.len(),
            x_tilde.len()
        )));
    }
    Ok(())
}

fn mean_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `sign(b − a)/numel`, the L1 mean gradient with respect to `b`; exact
/// ties get zero.
fn l1_mean_grad(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let share = 1.0 / a.len() as f64;
    ndarray::Zip::from(b).and(a).map_collect(|&bv, &av| {
        if bv > av {
            share
        } else if bv < av {
            -share
        } else {
            0.0
        }
    })
}

/// Mean absolute difference between the log-power spectrograms of the two
/// waveforms, over all bins × frames.
pub fn power_loss(x: &Waveform, x_tilde: &Waveform) -> Result<f64> {
    check_paired(x, x_tilde)?;
    let plan = StftPlan::new(StftParams::default(), x.sample_rate())?;
    let (re_x, im_x) = plan.re_im(&x.samples_f64())?;
    let (re_y, im_y) = plan.re_im(&x_tilde.samples_f64())?;
    let px = log_power_from_re_im(&re_x, &im_x, LOG_FLOOR);
    let py = log_power_from_re_im(&re_y, &im_y, LOG_FLOOR);
    Ok(mean_abs_diff(&px, &py))
}

/// [`power_loss`] plus its gradient with respect to the samples of
/// `x_tilde`.
pub fn power_loss_with_grad(x: &Waveform, x_tilde: &Waveform) -> Result<(f64, Vec<f32>)> {
    check_paired(x, x_tilde)?;
    let plan = StftPlan::new(StftParams::default(), x.sample_rate())?;
    let (re_x, im_x) = plan.re_im(&x.samples_f64())?;
    let (re_y, im_y) = plan.re_im(&x_tilde.samples_f64())?;
    let px = log_power_from_re_im(&re_x, &im_x, LOG_FLOOR);
    let py = log_power_from_re_im(&re_y, &im_y, LOG_FLOOR);
    let loss = mean_abs_diff(&px, &py);
    let g_py = l1_mean_grad(&px, &py);
    let (g_re, g_im) = log_power_backward(&re_y, &im_y, LOG_FLOOR, &g_py);
    let grad = plan.grad_to_samples(g_re.view(), g_im.view(), x_tilde.len());
    Ok((loss, grad.into_iter().map(|g| g as f32).collect()))
}

/// Mean absolute difference between the MFCC matrices of the two waveforms,
/// over all coefficients × frames.
pub fn mfcc_loss(x: &Waveform, x_tilde: &Waveform) -> Result<f64> {
    check_paired(x, x_tilde)?;
    let plan = MfccPlan::new(MfccParams::default(), x.sample_rate())?;
    let (mx, _) = plan.mfcc_cached(&x.samples_f64())?;
    let (my, _) = plan.mfcc_cached(&x_tilde.samples_f64())?;
    Ok(mean_abs_diff(&mx, &my))
}

/// [`mfcc_loss`] plus its gradient with respect to the samples of `x_tilde`.
pub fn mfcc_loss_with_grad(x: &Waveform, x_tilde: &Waveform) -> Result<(f64, Vec<f32>)> {
    check_paired(x, x_tilde)?;
    let plan = MfccPlan::new(MfccParams::default(), x.sample_rate())?;
    let (mx, _) = plan.mfcc_cached(&x.samples_f64())?;
    let (my, cache_y) = plan.mfcc_cached(&x_tilde.samples_f64())?;
    let loss = mean_abs_diff(&mx, &my);
    let g_coeffs = l1_mean_grad(&mx, &my);
    let grad = plan.mfcc_backward(&cache_y, &g_coeffs);
    Ok((loss, grad.into_iter().map(|g| g as f32).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::SAMPLE_RATE;

    fn noise_wave(len: usize, amp: f32, seed: u64) -> Waveform {
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let samples = (0..len)
            .map(|_| {
                state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                amp * (2.0 * ((state >> 11) as f32 / (1u64 << 53) as f32) - 1.0)
            })
            .collect();
        Waveform::new(samples, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn identical_inputs_cost_nothing() {
        let x = noise_wave(1_200, 0.3, 1);
        assert_eq!(power_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(mfcc_loss(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn scaling_by_e_costs_exactly_two() {
        // log power of e·x is log(e²·p) = log p + 2 in every bin, provided
        // nothing sits at the floor and e·x stays within [-1, 1].
        let x = noise_wave(1_200, 0.3, 2);
        let scaled = Waveform::new(
            x.samples().iter().map(|&s| s * std::f64::consts::E as f32).collect(),
            SAMPLE_RATE,
        )
        .unwrap();
        let loss = power_loss(&x, &scaled).unwrap();
        assert!((loss - 2.0).abs() < 1e-5, "{loss}");
    }

    #[test]
    fn mfcc_ignores_global_sign_flip() {
        // |STFT(−x)| = |STFT(x)| bin for bin, so the MFCCs are identical.
        let x = noise_wave(1_200, 0.5, 3);
        let flipped =
            Waveform::new(x.samples().iter().map(|&s| -s).collect(), SAMPLE_RATE).unwrap();
        assert_eq!(mfcc_loss(&x, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn both_losses_are_symmetric() {
        let x = noise_wave(1_200, 0.4, 4);
        let y = noise_wave(1_200, 0.4, 5);
        assert_eq!(power_loss(&x, &y).unwrap(), power_loss(&y, &x).unwrap());
        assert_eq!(mfcc_loss(&x, &y).unwrap(), mfcc_loss(&y, &x).unwrap());
    }

    #[test]
    fn length_mismatch_and_short_input_are_rejected() {
        let x = noise_wave(1_200, 0.3, 6);
        let y = noise_wave(1_100, 0.3, 7);
        assert!(power_loss(&x, &y).is_err());
        assert!(mfcc_loss(&x, &y).is_err());
        // Shorter than one analysis window (400 samples at 16 kHz).
        let tiny = noise_wave(300, 0.3, 8);
        assert!(power_loss(&tiny, &tiny).is_err());
        assert!(mfcc_loss(&tiny, &tiny).is_err());
    }

    fn directional_fd_check(
        loss: impl Fn(&Waveform, &Waveform) -> Result<f64>,
        with_grad: impl Fn(&Waveform, &Waveform) -> Result<(f64, Vec<f32>)>,
        eps: f32,
    ) {
        let x = noise_wave(1_120, 0.3, 9);
        let y = noise_wave(1_120, 0.3, 10);
        let (value, g) = with_grad(&x, &y).unwrap();
        assert_eq!(value, loss(&x, &y).unwrap());

        let g_l2 = g.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt() as f32;
        assert!(g_l2 > 0.0, "gradient vanished");
        let noise: Vec<f32> = (0..g.len())
            .map(|i| {
                ((i as u64).wrapping_mul(6364136223846793005) % 1000) as f32 / 500.0 - 1.0
            })
            .collect();
        let n_l2 = noise.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt() as f32;
        let dir: Vec<f32> = g
            .iter()
            .zip(&noise)
            .map(|(&gv, &nv)| gv / g_l2 + 0.5 * nv / n_l2)
            .collect();
        let analytic: f64 =
            g.iter().zip(&dir).map(|(&a, &b)| a as f64 * b as f64).sum();

        let shifted = |sign: f32| {
            let samples: Vec<f32> =
                y.samples().iter().zip(&dir).map(|(&s, &d)| s + sign * eps * d).collect();
            loss(&x, &Waveform::new(samples, SAMPLE_RATE).unwrap()).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps as f64);
        assert!(
            (fd - analytic).abs() < 1e-3 * analytic.abs().max(fd.abs()).max(1e-6),
            "fd {fd} vs analytic {analytic}"
        );
    }

    #[test]
    fn power_gradient_matches_finite_differences() {
        // Smaller step than the MFCC check: near-floor bins give the raw
        // log-power surface much higher curvature than the mel-averaged one.
        directional_fd_check(power_loss, power_loss_with_grad, 1e-4);
    }

    #[test]
    fn mfcc_gradient_matches_finite_differences() {
        directional_fd_check(mfcc_loss, mfcc_loss_with_grad, 1e-3);
    }
}
