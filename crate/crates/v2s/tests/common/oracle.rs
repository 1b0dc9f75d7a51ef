//! Brute-force reference implementations used to cross-check the production
//! DSP and metric code.
//!
//! Everything here is written as plain scalar loops over `Vec<f64>` —
//! deliberately naive O(n²) DFTs, explicit filterbank and DCT sums, and a
//! memoized recursive edit distance — so that agreement with the optimized
//! implementations is meaningful. Keep this file free of any imports from
//! the crate under test.

/// Periodic Hann window: w[n] = 0.5·(1 − cos(2πn/len)).
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Naive short-time DFT magnitudes.
///
/// Frames of `win` samples at stride `hop`, no centering, each multiplied by
/// a periodic Hann window and zero-padded to `fft` points. Returns one row
/// per frequency bin (fft/2 + 1 rows), one column per frame, as magnitudes.
pub fn naive_stft_magnitude(x: &[f64], win: usize, hop: usize, fft: usize) -> Vec<Vec<f64>> {
    assert!(x.len() >= win, "input shorter than one analysis window");
    let num_frames = 1 + (x.len() - win) / hop;
    let num_bins = fft / 2 + 1;
    let window = hann_periodic(win);
    let mut out = vec![vec![0.0; num_frames]; num_bins];
    for l in 0..num_frames {
        let frame: Vec<f64> = (0..win).map(|n| x[l * hop + n] * window[n]).collect();
        for k in 0..num_bins {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, &v) in frame.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / fft as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            out[k][l] = (re * re + im * im).sqrt();
        }
    }
    out
}

/// ln(max(magnitude², floor)) over a naive STFT.
pub fn naive_log_power(x: &[f64], win: usize, hop: usize, fft: usize, floor: f64) -> Vec<Vec<f64>> {
    let mags = naive_stft_magnitude(x, win, hop, fft);
    mags.iter()
        .map(|row| row.iter().map(|&m| (m * m).max(floor).ln()).collect())
        .collect()
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank as explicit per-bin sums: `bands` rows of
/// `fft/2 + 1` weights. Band edges are uniform on the mel scale between
/// fmin and fmax; triangles are evaluated at fractional bin positions.
pub fn naive_mel_filterbank(
    bands: usize,
    fft: usize,
    sample_rate: f64,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<f64>> {
    let num_bins = fft / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    // bands + 2 edge points, uniformly spaced in mel.
    let edges_hz: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let edges_bin: Vec<f64> = edges_hz.iter().map(|&f| f * fft as f64 / sample_rate).collect();
    let mut bank = vec![vec![0.0; num_bins]; bands];
    for m in 0..bands {
        let (left, center, right) = (edges_bin[m], edges_bin[m + 1], edges_bin[m + 2]);
        for k in 0..num_bins {
            let kf = k as f64;
            let rising = if center > left { (kf - left) / (center - left) } else { 0.0 };
            let falling = if right > center { (right - kf) / (right - center) } else { 0.0 };
            let w = rising.min(falling);
            if w > 0.0 {
                bank[m][k] = w;
            }
        }
    }
    bank
}

/// Log mel-band energies from explicit sums: filterbank applied to the
/// power spectrum (magnitude²), floored at `floor` before ln.
pub fn naive_mel_spectrogram(
    x: &[f64],
    bands: usize,
    win: usize,
    hop: usize,
    fft: usize,
    sample_rate: f64,
    fmin: f64,
    fmax: f64,
    floor: f64,
) -> Vec<Vec<f64>> {
    let mags = naive_stft_magnitude(x, win, hop, fft);
    let bank = naive_mel_filterbank(bands, fft, sample_rate, fmin, fmax);
    let num_frames = mags[0].len();
    let mut out = vec![vec![0.0; num_frames]; bands];
    for m in 0..bands {
        for l in 0..num_frames {
            let mut e = 0.0;
            for (k, row) in mags.iter().enumerate() {
                e += bank[m][k] * row[l] * row[l];
            }
            out[m][l] = e.max(floor).ln();
        }
    }
    out
}

/// MFCCs from explicit sums: orthonormal DCT-II of the log mel energies,
/// keeping the first `coeffs` coefficients.
pub fn naive_mfcc(
    x: &[f64],
    coeffs: usize,
    bands: usize,
    win: usize,
    hop: usize,
    fft: usize,
    sample_rate: f64,
    fmin: f64,
    fmax: f64,
    floor: f64,
) -> Vec<Vec<f64>> {
    let logmel = naive_mel_spectrogram(x, bands, win, hop, fft, sample_rate, fmin, fmax, floor);
    let num_frames = logmel[0].len();
    let mut out = vec![vec![0.0; num_frames]; coeffs];
    for i in 0..coeffs {
        let scale = if i == 0 {
            (1.0 / bands as f64).sqrt()
        } else {
            (2.0 / bands as f64).sqrt()
        };
        for l in 0..num_frames {
            let mut acc = 0.0;
            for (j, band) in logmel.iter().enumerate() {
                let angle =
                    std::f64::consts::PI * i as f64 * (2 * j + 1) as f64 / (2 * bands) as f64;
                acc += band[l] * angle.cos();
            }
            out[i][l] = scale * acc;
        }
    }
    out
}

/// Overlap-add by direct summation: each segment of length 2n is placed at
/// offset t·n, overlapping samples are averaged by contributor count, and
/// the result is trimmed to segments.len()·n samples.
pub fn naive_overlap_add(segments: &[Vec<f64>], n: usize) -> Vec<f64> {
    let two_n = 2 * n;
    for seg in segments {
        assert_eq!(seg.len(), two_n, "all segments must have length 2n");
    }
    let full = segments.len() * n + n;
    let mut sum = vec![0.0; full];
    let mut count = vec![0u32; full];
    for (t, seg) in segments.iter().enumerate() {
        for (i, &v) in seg.iter().enumerate() {
            sum[t * n + i] += v;
            count[t * n + i] += 1;
        }
    }
    (0..segments.len() * n)
        .map(|j| sum[j] / count[j] as f64)
        .collect()
}

/// Word error rate by exhaustive memoized recursion over alignment choices —
/// a deliberately different route from the iterative dynamic program under
/// test. Returns (S + D + I) / reference length.
pub fn naive_wer(reference: &[&str], hypothesis: &[&str]) -> f64 {
    assert!(!reference.is_empty(), "reference must be nonempty");
    fn edits(
        r: &[&str],
        h: &[&str],
        i: usize,
        j: usize,
        memo: &mut std::collections::HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == r.len() {
            return h.len() - j; // remaining hypothesis words are insertions
        }
        if j == h.len() {
            return r.len() - i; // remaining reference words are deletions
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if r[i] == h[j] {
            edits(r, h, i + 1, j + 1, memo)
        } else {
            let sub = edits(r, h, i + 1, j + 1, memo);
            let del = edits(r, h, i + 1, j, memo);
            let ins = edits(r, h, i, j + 1, memo);
            1 + sub.min(del).min(ins)
        };
        memo.insert((i, j), v);
        v
    }
    let mut memo = std::collections::HashMap::new();
    edits(reference, hypothesis, 0, 0, &mut memo) as f64 / reference.len() as f64
}

/// Dominant frequency of a short segment by brute-force DFT over all bins
/// (rectangular window), in Hz. Used to check synthetic-corpus audio.
pub fn dominant_frequency(segment: &[f64], sample_rate: f64) -> f64 {
    let n = segment.len();
    let mut best_bin = 0;
    let mut best_power = -1.0;
    for k in 0..n / 2 + 1 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &v) in segment.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += v * angle.cos();
            im += v * angle.sin();
        }
        let p = re * re + im * im;
        if p > best_power {
            best_power = p;
            best_bin = k;
        }
    }
    best_bin as f64 * sample_rate / n as f64
}

/// Deterministic pseudo-random signal in [-amp, amp] from a tiny LCG, so
/// oracle tests don't depend on the crate's RNG.
pub fn lcg_noise(len: usize, amp: f64, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let unit = (state >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
            amp * (2.0 * unit - 1.0)
        })
        .collect()
}

/// Max absolute difference between two equally-shaped row-major matrices.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "row count mismatch");
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len(), "column count mismatch");
        for (&va, &vb) in ra.iter().zip(rb) {
            worst = worst.max((va - vb).abs());
        }
    }
    worst
}
