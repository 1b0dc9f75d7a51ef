//! Row-level gather/scatter kernels shared by the convolution layers.
//!
//! im2col-style loops spend their time copying strided slices in and out
//! of matrices. Doing that through per-element array indexing costs a
//! bounds check and index arithmetic on every value; these helpers work
//! on raw slices, with a `memcpy` fast path for stride 1. They move
//! values only — summation order in the callers is unchanged.

/// Output positions served by one kernel tap.
///
/// A tap at offset `tap` reads input index `l·stride + tap − padding` for
/// output position `l`. Returns `(lo, hi, base)` — the half-open range of
/// `l` whose reads land inside `0..len` (capped at `out_len`) and the
/// input index read at `l = lo` — or `None` when no position is valid.
pub(crate) fn tap_range(
    stride: usize,
    padding: usize,
    tap: usize,
    len: usize,
    out_len: usize,
) -> Option<(usize, usize, usize)> {
    let lo = if tap >= padding {
        0
    } else {
        (padding - tap + stride - 1) / stride
    };
    let largest = (padding + len).checked_sub(tap + 1)?; // max l·stride
    let hi = (largest / stride + 1).min(out_len);
    if lo >= hi {
        return None;
    }
    Some((lo, hi, lo * stride + tap - padding))
}

/// `dst[l] = src[base + (l − lo)·stride]` for `l` in `lo..hi`.
pub(crate) fn gather_tap(
    dst: &mut [f32],
    src: &[f32],
    stride: usize,
    (lo, hi, base): (usize, usize, usize),
) {
    if stride == 1 {
        dst[lo..hi].copy_from_slice(&src[base..base + (hi - lo)]);
    } else {
        let mut p = base;
        for v in &mut dst[lo..hi] {
            *v = src[p];
            p += stride;
        }
    }
}

/// `dst[base + (l − lo)·stride] += src[l]` for `l` in `lo..hi`.
pub(crate) fn scatter_tap_add(
    dst: &mut [f32],
    src: &[f32],
    stride: usize,
    (lo, hi, base): (usize, usize, usize),
) {
    if stride == 1 {
        for (d, &v) in dst[base..base + (hi - lo)].iter_mut().zip(&src[lo..hi]) {
            *d += v;
        }
    } else {
        let mut p = base;
        for &v in &src[lo..hi] {
            dst[p] += v;
            p += stride;
        }
    }
}
