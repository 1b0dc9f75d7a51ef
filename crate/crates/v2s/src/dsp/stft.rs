//! Short-time Fourier analysis via precomputed windowed DFT matrices.
//!
//! The transform is expressed as two dense matrix products (cosine and sine
//! parts), which keeps it transparently differentiable: the exact adjoint of
//! the analysis is the transposed product, so gradients with respect to the
//! input samples fall out of the same matrices. At the sizes used here
//! (257×400 per frame) this is fast enough that a dedicated FFT buys nothing.

use ndarray::{Array2, ArrayView2};

use crate::core::Waveform;
use crate::error::{Error, Result};

/// Spectrogram floor applied before logarithms, so silence stays finite.
pub const LOG_FLOOR: f64 = 1e-10;

/// Analysis parameters: 25 ms periodic-Hann windows, 10 ms hop, 512-point
/// transform, no center padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
        }
    }
}

impl StftParams {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let win = self.window_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if win == 0 || hop == 0 {
            return Err(Error::Config(format!(
                "window ({win} samples) and hop ({hop} samples) must both be nonzero"
            )));
        }
        if win > self.fft_size {
            return Err(Error::Config(format!(
                "window length {win} exceeds fft_size {}",
                self.fft_size
            )));
        }
        if hop > win {
            return Err(Error::Config(format!(
                "hop {hop} exceeds window length {win}"
            )));
        }
        Ok(())
    }

    /// Frame count for an input of `len` samples: 1 + ⌊(len − window)/hop⌋.
    pub fn num_frames(&self, len: usize, sample_rate: u32) -> Result<usize> {
        let win = self.window_samples(sample_rate);
        if len < win {
            return Err(Error::Shape(format!(
                "waveform has {len} samples but the analysis window needs at least {win}"
            )));
        }
        Ok(1 + (len - win) / self.hop_samples(sample_rate))
    }
}

/// Periodic Hann window of length `len`.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Precomputed windowed DFT matrices for one (params, sample_rate) pair.
///
/// `cos_w[k][n] = w[n]·cos(2πkn/fft)` and `sin_w[k][n] = −w[n]·sin(2πkn/fft)`,
/// so for a frame x: re = cos_w·x and im = sin_w·x give the standard DFT of
/// the windowed, implicitly zero-padded frame.
pub struct StftPlan {
    params: StftParams,
    sample_rate: u32,
    window_len: usize,
    hop: usize,
    cos_w: Array2<f64>,
    sin_w: Array2<f64>,
}

impl StftPlan {
    pub fn new(params: StftParams, sample_rate: u32) -> Result<Self> {
        params.validate(sample_rate)?;
        let window_len = params.window_samples(sample_rate);
        let hop = params.hop_samples(sample_rate);
        let bins = params.num_bins();
        let window = hann_window(window_len);
        let mut cos_w = Array2::zeros((bins, window_len));
        let mut sin_w = Array2::zeros((bins, window_len));
        for k in 0..bins {
            for n in 0..window_len {
                let angle = 2.0 * std::f64::consts::PI * (k * n) as f64 / params.fft_size as f64;
                cos_w[[k, n]] = window[n] * angle.cos();
                sin_w[[k, n]] = -window[n] * angle.sin();
            }
        }
        Ok(StftPlan {
            params,
            sample_rate,
            window_len,
            hop,
            cos_w,
            sin_w,
        })
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_bins(&self) -> usize {
        self.params.num_bins()
    }

    pub fn num_frames(&self, len: usize) -> Result<usize> {
        self.params.num_frames(len, self.sample_rate)
    }

    fn frame_matrix(&self, samples: &[f64], num_frames: usize) -> Array2<f64> {
        let mut frames = Array2::zeros((self.window_len, num_frames));
        for l in 0..num_frames {
            for n in 0..self.window_len {
                frames[[n, l]] = samples[l * self.hop + n];
            }
        }
        frames
    }

    /// Real and imaginary DFT parts, each (bins × frames).
    pub fn re_im(&self, samples: &[f64]) -> Result<(Array2<f64>, Array2<f64>)> {
        let num_frames = self.num_frames(samples.len())?;
        let frames = self.frame_matrix(samples, num_frames);
        Ok((self.cos_w.dot(&frames), self.sin_w.dot(&frames)))
    }

    /// Adjoint of `re_im`: maps gradients on the real/imaginary parts back to
    /// a gradient on the input samples (length `len`).
    pub fn grad_to_samples(
        &self,
        g_re: ArrayView2<f64>,
        g_im: ArrayView2<f64>,
        len: usize,
    ) -> Vec<f64> {
        let num_frames = g_re.dim().1;
        let g_frames = self.cos_w.t().dot(&g_re) + self.sin_w.t().dot(&g_im);
        let mut grad = vec![0.0; len];
        for l in 0..num_frames {
            for n in 0..self.window_len {
                grad[l * self.hop + n] += g_frames[[n, l]];
            }
        }
        grad
    }
}

/// Magnitudes |STFT(x)|, shaped (bins × frames).
pub fn stft_magnitude(waveform: &Waveform, params: &StftParams) -> Result<Array2<f64>> {
    let plan = StftPlan::new(*params, waveform.sample_rate())?;
    let (re, im) = plan.re_im(&waveform.samples_f64())?;
    Ok(magnitude_from_re_im(&re, &im))
}

pub fn magnitude_from_re_im(re: &Array2<f64>, im: &Array2<f64>) -> Array2<f64> {
    let mut out = re.clone();
    out.zip_mut_with(im, |r, &i| *r = (*r * *r + i * i).sqrt());
    out
}

/// ln(max(|STFT(x)|², floor)), shaped (bins × frames).
pub fn log_power_spectrogram(
    waveform: &Waveform,
    params: &StftParams,
    floor: f64,
) -> Result<Array2<f64>> {
    if floor <= 0.0 {
        return Err(Error::Config(format!("log floor must be > 0, got {floor}")));
    }
    let plan = StftPlan::new(*params, waveform.sample_rate())?;
    let (re, im) = plan.re_im(&waveform.samples_f64())?;
    Ok(log_power_from_re_im(&re, &im, floor))
}

pub fn log_power_from_re_im(re: &Array2<f64>, im: &Array2<f64>, floor: f64) -> Array2<f64> {
    let mut out = re.clone();
    out.zip_mut_with(im, |r, &i| *r = (*r * *r + i * i).max(floor).ln());
    out
}

/// Backward of `log_power_from_re_im`: given the upstream gradient on the
/// log-power matrix and the cached re/im parts, returns gradients on re/im.
/// Entries at the floor have zero gradient.
pub fn log_power_backward(
    re: &Array2<f64>,
    im: &Array2<f64>,
    floor: f64,
    g_logpow: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let mut g_re = Array2::zeros(re.raw_dim());
    let mut g_im = Array2::zeros(im.raw_dim());
    for ((idx, &g), (&r, &i)) in g_logpow.indexed_iter().zip(re.iter().zip(im.iter())) {
        let p = r * r + i * i;
        if p > floor {
            g_re[idx] = g * 2.0 * r / p;
            g_im[idx] = g * 2.0 * i / p;
        }
    }
    (g_re, g_im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Waveform;

    fn sine(freq: f64, len: usize, rate: f64, amp: f32) -> Waveform {
        let samples = (0..len)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / rate).sin() as f32)
            .collect();
        Waveform::new(samples, rate as u32).unwrap()
    }

    #[test]
    fn one_second_input_gives_98_frames() {
        let w = sine(440.0, 16_000, 16_000.0, 0.5);
        let mag = stft_magnitude(&w, &StftParams::default()).unwrap();
        assert_eq!(mag.dim(), (257, 98));
    }

    #[test]
    fn pure_1khz_sine_peaks_at_bin_32() {
        let w = sine(1000.0, 16_000, 16_000.0, 0.9);
        let mag = stft_magnitude(&w, &StftParams::default()).unwrap();
        for l in 0..mag.dim().1 {
            let mut best = 0;
            for k in 0..mag.dim().0 {
                if mag[[k, l]] > mag[[best, l]] {
                    best = k;
                }
            }
            assert_eq!(best, 32, "frame {l} peaked at bin {best}");
        }
    }

    #[test]
    fn zero_input_gives_zero_magnitudes() {
        let w = Waveform::new(vec![0.0; 2000], 16_000).unwrap();
        let mag = stft_magnitude(&w, &StftParams::default()).unwrap();
        assert!(mag.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn magnitude_scales_linearly() {
        // Doubling is exact in f32, so the inputs are exactly proportional.
        let w1 = sine(700.0, 4000, 16_000.0, 0.25);
        let w2 = Waveform::new(w1.samples().iter().map(|&s| 2.0 * s).collect(), 16_000).unwrap();
        let m1 = stft_magnitude(&w1, &StftParams::default()).unwrap();
        let m2 = stft_magnitude(&w2, &StftParams::default()).unwrap();
        for (a, b) in m1.iter().zip(m2.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn too_short_input_names_minimum_length() {
        let w = Waveform::new(vec![0.1; 399], 16_000).unwrap();
        let err = stft_magnitude(&w, &StftParams::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("399") && msg.contains("400"), "{msg}");
    }

    #[test]
    fn zero_input_log_power_is_floor() {
        let w = Waveform::new(vec![0.0; 1600], 16_000).unwrap();
        let lp = log_power_spectrogram(&w, &StftParams::default(), LOG_FLOOR).unwrap();
        let expected = LOG_FLOOR.ln();
        assert!(lp.iter().all(|&v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn scaling_by_e_shifts_log_power_by_two() {
        // e is not exactly representable, so each scaled sample picks up an
        // independent ~6e-8 relative rounding; restrict the comparison to
        // energetic entries where that stays far below the 1e-4 tolerance.
        let base = sine(777.0, 3200, 16_000.0, 0.3);
        let scaled = Waveform::new(
            base.samples().iter().map(|&s| s * std::f64::consts::E as f32).collect(),
            16_000,
        )
        .unwrap();
        let lp_base = log_power_spectrogram(&base, &StftParams::default(), LOG_FLOOR).unwrap();
        let lp_scaled =
            log_power_spectrogram(&scaled, &StftParams::default(), LOG_FLOOR).unwrap();
        let mut checked = 0usize;
        for (a, b) in lp_base.iter().zip(lp_scaled.iter()) {
            if *a > -7.0 {
                assert!((b - a - 2.0).abs() < 1e-4, "{a} vs {b}");
                checked += 1;
            }
        }
        assert!(checked > 50, "too few comparable entries: {checked}");
    }

    #[test]
    fn grad_to_samples_is_exact_adjoint() {
        // ⟨A x, y⟩ must equal ⟨x, Aᵀ y⟩ for random x, y: the defining
        // property of the adjoint, checked without finite differences.
        let plan = StftPlan::new(StftParams::default(), 16_000).unwrap();
        let len = 1200;
        let x: Vec<f64> = (0..len).map(|i| ((i * 37 + 11) % 101) as f64 / 101.0 - 0.5).collect();
        let (re, im) = plan.re_im(&x).unwrap();
        let mut y_re = re.clone();
        let mut y_im = im.clone();
        for (i, v) in y_re.iter_mut().enumerate() {
            *v = ((i * 13 + 7) % 89) as f64 / 89.0 - 0.5;
        }
        for (i, v) in y_im.iter_mut().enumerate() {
            *v = ((i * 29 + 3) % 97) as f64 / 97.0 - 0.5;
        }
        let lhs: f64 = re.iter().zip(y_re.iter()).map(|(a, b)| a * b).sum::<f64>()
            + im.iter().zip(y_im.iter()).map(|(a, b)| a * b).sum::<f64>();
        let adj = plan.grad_to_samples(y_re.view(), y_im.view(), len);
        let rhs: f64 = x.iter().zip(adj.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    fn lcg_noise(len: usize, amp: f64, mut state: u64) -> Vec<f64> {
        (0..len)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                amp * (2.0 * (state >> 11) as f64 / (1u64 << 53) as f64 - 1.0)
            })
            .collect()
    }

    #[test]
    fn log_power_backward_matches_finite_differences() {
        let plan = StftPlan::new(StftParams::default(), 16_000).unwrap();
        let len = 800;
        // Broadband noise keeps every bin well above the floor, where the
        // log is smooth enough for central differences to be trustworthy.
        let x = lcg_noise(len, 0.4, 42);
        let (re, im) = plan.re_im(&x).unwrap();
        let lp = log_power_from_re_im(&re, &im, LOG_FLOOR);
        // Loss = mean of all entries; analytic gradient via the chain.
        let g_lp = Array2::from_elem(lp.raw_dim(), 1.0 / lp.len() as f64);
        let (g_re, g_im) = log_power_backward(&re, &im, LOG_FLOOR, &g_lp);
        let analytic = plan.grad_to_samples(g_re.view(), g_im.view(), len);
        let eps = 1e-6;
        for &idx in &[0usize, 100, 333, 555, 799] {
            let mut xp = x.clone();
            xp[idx] += eps;
            let (rp, ip) = plan.re_im(&xp).unwrap();
            let lp_p = log_power_from_re_im(&rp, &ip, LOG_FLOOR);
            let mut xm = x.clone();
            xm[idx] -= eps;
            let (rm, imm) = plan.re_im(&xm).unwrap();
            let lp_m = log_power_from_re_im(&rm, &imm, LOG_FLOOR);
            let fd = (lp_p.mean().unwrap() - lp_m.mean().unwrap()) / (2.0 * eps);
            assert!(
                (fd - analytic[idx]).abs() < 1e-6 * fd.abs().max(1e-3),
                "sample {idx}: fd {fd} vs analytic {}",
                analytic[idx]
            );
        }
    }
}
