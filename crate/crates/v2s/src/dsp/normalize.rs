//! Standardize–clip–rescale pipeline feeding the power critic.

use ndarray::Array2;

use crate::core::NormalizedSpectrogram;

/// Floor applied to the standard deviation so constant inputs map to zero
/// instead of dividing by zero.
pub const STD_FLOOR: f64 = 1e-8;

/// Everything the backward pass needs about one normalization call.
pub struct NormalizeCache {
    z: Array2<f64>,
    sigma: f64,
    floored: bool,
}

/// Standardizes by the matrix's own mean and (population) standard deviation,
/// clips to [-3, 3], and divides by 3, landing in [-1, 1].
pub fn normalize_for_critic(logspec: &Array2<f64>) -> (NormalizedSpectrogram, NormalizeCache) {
    let n = logspec.len() as f64;
    let mean = logspec.sum() / n;
    let var = logspec.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let floored = std < STD_FLOOR;
    let sigma = if floored { STD_FLOOR } else { std };
    let z = logspec.mapv(|v| (v - mean) / sigma);
    let out = z.mapv(|v| v.clamp(-3.0, 3.0) / 3.0);
    let spec = NormalizedSpectrogram::new(out)
        .expect("clamp(-3,3)/3 is always within [-1,1]");
    (spec, NormalizeCache { z, sigma, floored })
}

/// Backward of `normalize_for_critic`.
///
/// Clipped entries get zero gradient. When the standard deviation was above
/// its floor, the mean and sigma both depend on the input, giving the usual
/// whitening backward g/σ − mean(g)/σ − z·mean(g⊙z)/σ; when floored, sigma
/// is a constant and only the mean-centering term survives.
pub fn normalize_backward(cache: &NormalizeCache, g_out: &Array2<f64>) -> Array2<f64> {
    let n = cache.z.len() as f64;
    // Gradient through clip and the /3 rescale.
    let g_z = ndarray::Zip::from(g_out)
        .and(&cache.z)
        .map_collect(|&g, &z| if z.abs() < 3.0 { g / 3.0 } else { 0.0 });
    let g_mean = g_z.sum() / n;
    if cache.floored {
        return g_z.mapv(|g| g - g_mean) / cache.sigma;
    }
    let gz_dot_z = g_z
        .iter()
        .zip(cache.z.iter())
        .map(|(&g, &z)| g * z)
        .sum::<f64>()
        / n;
    ndarray::Zip::from(&g_z)
        .and(&cache.z)
        .map_collect(|&g, &z| (g - g_mean - z * gz_dot_z) / cache.sigma)
}
