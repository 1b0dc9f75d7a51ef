//! Signal processing: short-time Fourier analysis, spectrogram
//! normalization, mel/MFCC features, and overlap-add reconstruction.
//!
//! All numerics here run in f64. Operations that sit on the training path
//! come in pairs — a forward that returns a cache and a backward that maps
//! output gradients to input-sample gradients — so generator gradients can
//! flow through the spectral losses without an autodiff framework.

pub mod mel;
pub mod normalize;
pub mod ola;
pub mod stft;

pub use mel::{
    dct_matrix, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc, MfccCache, MfccParams,
    MfccPlan,
};
pub use normalize::{normalize_backward, normalize_for_critic, NormalizeCache, STD_FLOOR};
pub use ola::{overlap_add, overlap_add_samples};
pub use stft::{
    hann_window, log_power_backward, log_power_from_re_im, log_power_spectrogram,
    magnitude_from_re_im, stft_magnitude, StftParams, StftPlan, LOG_FLOOR,
};
