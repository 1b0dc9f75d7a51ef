//! Mel filterbank, log mel spectrogram, and MFCC extraction.
//!
//! Conventions fixed here: HTK mel scale (2595·log10(1 + f/700)), triangular
//! filters with band edges uniform in mel between fmin and fmax, filterbank
//! applied to the power spectrum, energies floored at 1e-10 before the
//! natural log, orthonormal DCT-II for the cepstrum.

use ndarray::Array2;

use crate::core::Waveform;
use crate::dsp::stft::{StftParams, StftPlan, LOG_FLOOR};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccParams {
    pub num_coefficients: usize,
    pub num_mel_bands: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub stft: StftParams,
}

impl Default for MfccParams {
    fn default() -> Self {
        MfccParams {
            num_coefficients: 25,
            num_mel_bands: 40,
            mel_fmin: 0.0,
            mel_fmax: 8000.0,
            stft: StftParams::default(),
        }
    }
}

impl MfccParams {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        self.stft.validate(sample_rate)?;
        if self.num_coefficients > self.num_mel_bands {
            return Err(Error::Config(format!(
                "num_coefficients {} exceeds num_mel_bands {}",
                self.num_coefficients, self.num_mel_bands
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if self.mel_fmax > nyquist {
            return Err(Error::Config(format!(
                "mel_fmax {} Hz exceeds Nyquist {} Hz",
                self.mel_fmax, nyquist
            )));
        }
        if self.mel_fmin < 0.0 || self.mel_fmin >= self.mel_fmax {
            return Err(Error::Config(format!(
                "mel_fmin {} must be in [0, mel_fmax)",
                self.mel_fmin
            )));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank, (num_mel_bands × num_bins). Triangles are evaluated
/// at fractional bin positions so narrow low-frequency bands keep coverage.
pub fn mel_filterbank(params: &MfccParams, sample_rate: u32) -> Result<Array2<f64>> {
    params.validate(sample_rate)?;
    let bands = params.num_mel_bands;
    let num_bins = params.stft.num_bins();
    let mel_lo = hz_to_mel(params.mel_fmin);
    let mel_hi = hz_to_mel(params.mel_fmax);
    let edge_bin: Vec<f64> = (0..bands + 2)
        .map(|i| {
            let mel = mel_lo + (mel_hi - mel_lo) * i as f64 / (bands + 1) as f64;
            mel_to_hz(mel) * params.stft.fft_size as f64 / sample_rate as f64
        })
        .collect();
    let mut bank = Array2::zeros((bands, num_bins));
    for m in 0..bands {
        let (left, center, right) = (edge_bin[m], edge_bin[m + 1], edge_bin[m + 2]);
        for k in 0..num_bins {
            let kf = k as f64;
            let rising = if center > left { (kf - left) / (center - left) } else { 0.0 };
            let falling = if right > center { (right - kf) / (right - center) } else { 0.0 };
            let w = rising.min(falling);
            if w > 0.0 {
                bank[[m, k]] = w;
            }
        }
        if bank.row(m).iter().all(|&v| v == 0.0) {
            return Err(Error::Config(format!(
                "mel band {m} covers no frequency bin; too many bands for this resolution"
            )));
        }
    }
    Ok(bank)
}

/// Orthonormal DCT-II matrix, (num_coefficients × num_bands).
pub fn dct_matrix(num_coefficients: usize, num_bands: usize) -> Array2<f64> {
    Array2::from_shape_fn((num_coefficients, num_bands), |(i, j)| {
        let scale = if i == 0 {
            (1.0 / num_bands as f64).sqrt()
        } else {
            (2.0 / num_bands as f64).sqrt()
        };
        let angle = std::f64::consts::PI * i as f64 * (2 * j + 1) as f64 / (2 * num_bands) as f64;
        scale * angle.cos()
    })
}

/// Precomputed state for repeated MFCC / mel-spectrogram extraction, plus the
/// caches required to push gradients back to the input samples.
pub struct MfccPlan {
    stft_plan: StftPlan,
    bank: Array2<f64>,
    dct: Array2<f64>,
    params: MfccParams,
}

/// Intermediate values retained for the backward pass.
pub struct MfccCache {
    re: Array2<f64>,
    im: Array2<f64>,
    /// Mel energies before the floor/log, (bands × frames).
    energies: Array2<f64>,
    input_len: usize,
}

impl MfccPlan {
    pub fn new(params: MfccParams, sample_rate: u32) -> Result<Self> {
        let bank = mel_filterbank(&params, sample_rate)?;
        let dct = dct_matrix(params.num_coefficients, params.num_mel_bands);
        let stft_plan = StftPlan::new(params.stft, sample_rate)?;
        Ok(MfccPlan {
            stft_plan,
            bank,
            dct,
            params,
        })
    }

    pub fn params(&self) -> &MfccParams {
        &self.params
    }

    /// Log mel energies, (bands × frames), with the backward cache.
    pub fn mel_spectrogram_cached(&self, samples: &[f64]) -> Result<(Array2<f64>, MfccCache)> {
        let (re, im) = self.stft_plan.re_im(samples)?;
        let power = ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| r * r + i * i);
        let energies = self.bank.dot(&power);
        let logmel = energies.mapv(|e| e.max(LOG_FLOOR).ln());
        Ok((
            logmel,
            MfccCache {
                re,
                im,
                energies,
                input_len: samples.len(),
            },
        ))
    }

    /// First `num_coefficients` cepstral coefficients per frame,
    /// (coefficients × frames), with the backward cache.
    pub fn mfcc_cached(&self, samples: &[f64]) -> Result<(Array2<f64>, MfccCache)> {
        let (logmel, cache) = self.mel_spectrogram_cached(samples)?;
        Ok((self.dct.dot(&logmel), cache))
    }

    /// Backward of `mfcc_cached`: gradient on the coefficient matrix back to
    /// a gradient on the input samples.
    pub fn mfcc_backward(&self, cache: &MfccCache, g_coeffs: &Array2<f64>) -> Vec<f64> {
        let g_logmel = self.dct.t().dot(g_coeffs);
        self.mel_backward(cache, &g_logmel)
    }

    /// Backward of `mel_spectrogram_cached`.
    pub fn mel_backward(&self, cache: &MfccCache, g_logmel: &Array2<f64>) -> Vec<f64> {
        // d ln(max(e, floor))/de = 1/e above the floor, 0 at or below it.
        let g_energy = ndarray::Zip::from(g_logmel)
            .and(&cache.energies)
            .map_collect(|&g, &e| if e > LOG_FLOOR { g / e } else { 0.0 });
        let g_power = self.bank.t().dot(&g_energy);
        let g_re = ndarray::Zip::from(&g_power).and(&cache.re).map_collect(|&g, &r| 2.0 * g * r);
        let g_im = ndarray::Zip::from(&g_power).and(&cache.im).map_collect(|&g, &i| 2.0 * g * i);
        self.stft_plan.grad_to_samples(g_re.view(), g_im.view(), cache.input_len)
    }
}

/// One-shot MFCC extraction, (num_coefficients × frames).
pub fn mfcc(waveform: &Waveform, params: &MfccParams) -> Result<Array2<f64>> {
    let plan = MfccPlan::new(*params, waveform.sample_rate())?;
    Ok(plan.mfcc_cached(&waveform.samples_f64())?.0)
}

/// One-shot log mel spectrogram, (num_mel_bands × frames).
pub fn mel_spectrogram(waveform: &Waveform, params: &MfccParams) -> Result<Array2<f64>> {
    let plan = MfccPlan::new(*params, waveform.sample_rate())?;
    Ok(plan.mel_spectrogram_cached(&waveform.samples_f64())?.0)
}
