//! Perceptual feature distance with a pluggable extractor.
//!
//! The loss is the mean absolute difference between feature matrices the
//! extractor computes for the real and synthesized waveforms. The extractor
//! is frozen during training — only the generator learns from this term.

use ndarray::{Array2, Array3, Axis};

use crate::core::rng::{streams, SeededRng};
use crate::core::Waveform;
use crate::error::{Error, Result};
use crate::model::{lrelu3, masked3};
use crate::nn::Conv1d;

/// A frozen map from waveforms to feature matrices `(frames × feature_dim)`.
///
/// Implementations must be deterministic in the sense they advertise and must
/// provide the adjoint [`PerceptualExtractor::feature_grad_to_samples`] so
/// the generator can backpropagate the feature-space L1 distance. A plug-in
/// wrapping an externally trained model satisfies the same contract; nothing
/// here assumes the fallback below.
pub trait PerceptualExtractor {
    /// Stable identifier recorded in logs.
    fn id(&self) -> &str;

    /// Whether identical inputs always produce identical features.
    fn deterministic(&self) -> bool;

    /// Feature matrix `(frames × feature_dim)` for one waveform.
    fn features(&self, wave: &Waveform) -> Result<Array2<f32>>;

    /// Gradient of `Σ_{ij} features(wave)_{ij} · g_features_{ij}` with
    /// respect to the waveform samples.
    fn feature_grad_to_samples(
        &self,
        wave: &Waveform,
        g_features: &Array2<f32>,
    ) -> Result<Vec<f32>>;
}

const LEAKY_SLOPE: f32 = 0.2;

/// A fixed randomly-initialized strided convolution stack.
///
/// **This is not a trained perceptual model.** It is a structural stand-in
/// with the right shape of machinery — local filters, downsampling, a
/// nonlinearity — so the feature-space loss path can be built and tested
/// without external assets. Random convolutional features still separate
/// obviously different signals (they preserve a sketch of local spectral
/// content), which is all the synthetic-corpus experiments need.
pub struct FallbackExtractor {
    convs: Vec<Conv1d>,
    id: String,
}

/// Builds the fallback extractor deterministically from a seed: three
/// Leaky-ReLU convolution layers with strides 10·4·4, mapping 16 kHz audio
/// to 96-dimensional features at 100 Hz.
pub fn fallback_extractor(seed: u64) -> FallbackExtractor {
    let mut rng = SeededRng::new(seed, streams::INIT_EXTRACTOR);
    let geometry = [(1, 32, 21, 10, 10), (32, 64, 9, 4, 4), (64, 96, 9, 4, 4)];
    let convs = geometry
        .iter()
        .map(|&(ic, oc, k, s, p)| Conv1d::new(ic, oc, k, s, p, 1, true, &mut rng))
        .collect();
    FallbackExtractor { convs, id: format!("fallback-conv-seed{seed}") }
}

impl FallbackExtractor {
    /// Runs the stack, keeping per-layer inputs and activation masks when
    /// the caller needs the backward pass. The final layer is linear — no
    /// activation — so features carry sign information.
    fn forward(
        &self,
        wave: &Waveform,
    ) -> Result<(Array2<f32>, Vec<Array3<f32>>, Vec<ndarray::ArrayD<f32>>)> {
        if wave.len() == 0 {
            return Err(Error::Shape("cannot extract features from an empty waveform".into()));
        }
        let samples: Vec<f32> = wave.samples().to_vec();
        let mut h = Array3::from_shape_vec((1, 1, samples.len()), samples)
            .expect("shape matches length");
        let mut inputs = Vec::with_capacity(self.convs.len());
        let mut masks = Vec::with_capacity(self.convs.len() - 1);
        for (l, conv) in self.convs.iter().enumerate() {
            let y = conv.forward(&h);
            inputs.push(h);
            if l + 1 < self.convs.len() {
                let (a, m) = lrelu3(&y, LEAKY_SLOPE);
                masks.push(m);
                h = a;
            } else {
                h = y;
            }
        }
        let features = h.index_axis(Axis(0), 0).t().to_owned();
        Ok((features, inputs, masks))
    }
}

impl PerceptualExtractor for FallbackExtractor {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn features(&self, wave: &Waveform) -> Result<Array2<f32>> {
        Ok(self.forward(wave)?.0)
    }

    fn feature_grad_to_samples(
        &self,
        wave: &Waveform,
        g_features: &Array2<f32>,
    ) -> Result<Vec<f32>> {
        let (features, inputs, masks) = self.forward(wave)?;
        if g_features.dim() != features.dim() {
            return Err(Error::Shape(format!(
                "feature gradient is {:?}, extractor produced {:?}",
                g_features.dim(),
                features.dim()
            )));
        }
        let mut g = g_features.t().to_owned().insert_axis(Axis(0));
        for l in (0..self.convs.len()).rev() {
            if l + 1 < self.convs.len() {
                g = masked3(&g, &masks[l]);
            }
            g = self.convs[l].backward_input(&g, inputs[l].dim().2);
        }
        Ok(g.index_axis(Axis(0), 0).index_axis(Axis(0), 0).to_vec())
    }
}

fn check_same_length(x: &Waveform, x_tilde: &Waveform) -> Result<()> {
    if x.len() != x_tilde.len() {
        return Err(Error::Shape(format!(
            "waveforms have {} and {} samples; the perceptual loss needs equal lengths",
            x.len(),
            x_tilde.len()
        )));
    }
    Ok(())
}

/// Mean absolute difference between the extractor's features for the two
/// waveforms.
pub fn pase_loss(
    extractor: &dyn PerceptualExtractor,
    x: &Waveform,
    x_tilde: &Waveform,
) -> Result<f64> {
    check_same_length(x, x_tilde)?;
    let fx = extractor.features(x)?;
    let fy = extractor.features(x_tilde)?;
    if fx.dim() != fy.dim() {
        return Err(Error::Shape(format!(
            "extractor produced {:?} and {:?} feature matrices for equal-length inputs",
            fx.dim(),
            fy.dim()
        )));
    }
    let total: f64 =
        fx.iter().zip(fy.iter()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum();
    Ok(total / fx.len() as f64)
}

/// [`pase_loss`] plus its gradient with respect to the samples of `x_tilde`.
///
/// The L1 subgradient at exact feature ties is taken as zero.
pub fn pase_loss_with_grad(
    extractor: &dyn PerceptualExtractor,
    x: &Waveform,
    x_tilde: &Waveform,
) -> Result<(f64, Vec<f32>)> {
    check_same_length(x, x_tilde)?;
    let fx = extractor.features(x)?;
    let fy = extractor.features(x_tilde)?;
    if fx.dim() != fy.dim() {
        return Err(Error::Shape(format!(
            "extractor produced {:?} and {:?} feature matrices for equal-length inputs",
            fx.dim(),
            fy.dim()
        )));
    }
    let numel = fx.len() as f64;
    let loss = fx
        .iter()
        .zip(fy.iter())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum::<f64>()
        / numel;
    let share = (1.0 / numel) as f32;
    let g_features = ndarray::Zip::from(&fy).and(&fx).map_collect(|&b, &a| {
        match b.partial_cmp(&a) {
            Some(std::cmp::Ordering::Greater) => share,
            Some(std::cmp::Ordering::Less) => -share,
            _ => 0.0,
        }
    });
    let grad = extractor.feature_grad_to_samples(x_tilde, &g_features)?;
    Ok((loss, grad))
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

    fn sine_wave(len: usize, hz: f32) -> Waveform {
        let samples = (0..len)
            .map(|i| 0.3 * (2.0 * std::f32::consts::PI * hz * i as f32 / 16_000.0).sin())
            .collect();
        Waveform::new(samples, SAMPLE_RATE).unwrap()
    }

    /// Features are the samples themselves, one frame: lets closed-form
    /// loss values be checked without any convolution in the way.
    struct IdentityExtractor;

    impl PerceptualExtractor for IdentityExtractor {
        fn id(&self) -> &str {
            "identity"
        }
        fn deterministic(&self) -> bool {
            true
        }
        fn features(&self, wave: &Waveform) -> Result<Array2<f32>> {
            Ok(Array2::from_shape_vec((1, wave.len()), wave.samples().to_vec())
                .expect("row matrix"))
        }
        fn feature_grad_to_samples(
            &self,
            _wave: &Waveform,
            g_features: &Array2<f32>,
        ) -> Result<Vec<f32>> {
            Ok(g_features.iter().copied().collect())
        }
    }

    #[test]
    fn identical_inputs_cost_nothing() {
        let e = fallback_extractor(1);
        let x = noise_wave(2_000, 0.3, 5);
        assert_eq!(pase_loss(&e, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn identity_extractor_half_offset_costs_half() {
        let x = Waveform::new(vec![0.0; 4], SAMPLE_RATE).unwrap();
        let y = Waveform::new(vec![0.5; 4], SAMPLE_RATE).unwrap();
        assert_eq!(pase_loss(&IdentityExtractor, &x, &y).unwrap(), 0.5);
    }

    #[test]
    fn loss_matches_brute_force_feature_recomputation() {
        let e = fallback_extractor(7);
        let x = noise_wave(3_000, 0.3, 11);
        let y = noise_wave(3_000, 0.3, 12);
        let got = pase_loss(&e, &x, &y).unwrap();
        // Recompute from the raw feature matrices, independently of the
        // loss implementation.
        let fx = e.features(&x).unwrap();
        let fy = e.features(&y).unwrap();
        let want = fx
            .iter()
            .zip(fy.iter())
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum::<f64>()
            / fx.len() as f64;
        assert_eq!(got, want);
    }

    #[test]
    fn loss_is_symmetric() {
        let e = fallback_extractor(2);
        let x = noise_wave(2_500, 0.3, 21);
        let y = noise_wave(2_500, 0.3, 22);
        assert_eq!(pase_loss(&e, &x, &y).unwrap(), pase_loss(&e, &y, &x).unwrap());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let e = fallback_extractor(3);
        let x = noise_wave(2_000, 0.3, 31);
        let y = noise_wave(2_001, 0.3, 32);
        assert!(pase_loss(&e, &x, &y).is_err());
    }

    #[test]
    fn same_seed_reproduces_features_bitwise() {
        let x = noise_wave(2_000, 0.3, 41);
        let a = fallback_extractor(9).features(&x).unwrap();
        let b = fallback_extractor(9).features(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_produce_different_features() {
        let x = noise_wave(2_000, 0.3, 42);
        let a = fallback_extractor(9).features(&x).unwrap();
        let b = fallback_extractor(10).features(&x).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn sine_and_silence_are_distinguished() {
        let e = fallback_extractor(4);
        let sine = sine_wave(2_000, 440.0);
        let silence = Waveform::new(vec![0.0; 2_000], SAMPLE_RATE).unwrap();
        assert!(pase_loss(&e, &sine, &silence).unwrap() > 0.0);
    }

    #[test]
    fn feature_shape_is_frames_by_dim() {
        let e = fallback_extractor(5);
        let x = noise_wave(16_000, 0.3, 51);
        let f = e.features(&x).unwrap();
        assert_eq!(f.dim(), (100, 96));
    }

    #[test]
    fn sample_gradient_matches_directional_finite_differences() {
        let e = fallback_extractor(6);
        let x = noise_wave(1_000, 0.3, 61);
        let y = noise_wave(1_000, 0.3, 62);
        let (_, g) = pase_loss_with_grad(&e, &x, &y).unwrap();

        // Probe along the gradient plus a fixed off-axis component so the
        // measured slope is well above f32 forward rounding.
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

        let eps = 2e-2f32;
        let shifted = |sign: f32| {
            let samples: Vec<f32> =
                y.samples().iter().zip(&dir).map(|(&s, &d)| s + sign * eps * d).collect();
            let w = Waveform::new(samples, SAMPLE_RATE).unwrap();
            pase_loss(&e, &x, &w).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps as f64);
        assert!(
            (fd - analytic).abs() < 1e-2 * analytic.abs().max(fd.abs()).max(1e-4),
            "fd {fd} vs analytic {analytic}"
        );
    }
}
