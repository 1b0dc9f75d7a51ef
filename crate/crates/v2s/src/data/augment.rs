//! Training-time video augmentation: one shared random crop, then an
//! optional whole-clip horizontal flip.
//!
//! The crop window is 90% of each side (rounded), drawn once and applied
//! identically to every frame so the clip stays temporally coherent, then
//! rescaled back to the original size with bilinear interpolation. At test
//! time [`center_crop`] applies the same-size window, centered, with no
//! flip.

use ndarray::Array3;

use crate::core::{SeededRng, VideoClip};

const CROP_FRACTION: f64 = 0.9;

fn crop_size(full: usize) -> usize {
    ((full as f64) * CROP_FRACTION).round() as usize
}

/// Bilinear resize of every frame from the crop size back to `(h, w)`,
/// using the half-pixel coordinate convention. Outputs are convex
/// combinations of inputs, so the `[0, 1]` range is preserved.
fn resize_frames(cropped: &Array3<f32>, h: usize, w: usize) -> Array3<f32> {
    let (t, ch, cw) = cropped.dim();
    let scale_y = ch as f64 / h as f64;
    let scale_x = cw as f64 / w as f64;
    let src = |d: usize, scale: f64, limit: usize| -> (usize, usize, f32) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (limit - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(limit - 1), (s - lo as f64) as f32)
    };
    Array3::from_shape_fn((t, h, w), |(ti, y, x)| {
        let (y0, y1, fy) = src(y, scale_y, ch);
        let (x0, x1, fx) = src(x, scale_x, cw);
        let top = cropped[[ti, y0, x0]] * (1.0 - fx) + cropped[[ti, y0, x1]] * fx;
        let bottom = cropped[[ti, y1, x0]] * (1.0 - fx) + cropped[[ti, y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

fn crop_and_resize(clip: &VideoClip, top: usize, left: usize) -> Array3<f32> {
    let (t, h, w) = clip.frames().dim();
    let (ch, cw) = (crop_size(h), crop_size(w));
    let cropped = clip
        .frames()
        .slice(ndarray::s![0..t, top..top + ch, left..left + cw])
        .to_owned();
    resize_frames(&cropped, h, w)
}

/// Mirrors every frame left-to-right. Applying it twice is the identity.
fn hflip(frames: &Array3<f32>) -> Array3<f32> {
    let mut out = frames.clone();
    out.invert_axis(ndarray::Axis(2));
    out
}

/// Random crop (shared by all frames) rescaled to the input size, then a
/// whole-clip horizontal flip with probability ½. Draw order is fixed —
/// crop top, crop left, flip coin — so a seeded rng reproduces the exact
/// augmentation.
pub fn augment(clip: &VideoClip, rng: &mut SeededRng) -> VideoClip {
    let (_, h, w) = clip.frames().dim();
    let top = rng.below(h - crop_size(h) + 1);
    let left = rng.below(w - crop_size(w) + 1);
    let mut frames = crop_and_resize(clip, top, left);
    if rng.coin(0.5) {
        frames = hflip(&frames);
    }
    VideoClip::new(frames, clip.frame_rate()).expect("augmentation preserves validity")
}

/// The test-time counterpart: the same-size crop window, centered, no flip.
pub fn center_crop(clip: &VideoClip) -> VideoClip {
    let (_, h, w) = clip.frames().dim();
    let top = (h - crop_size(h)) / 2;
    let left = (w - crop_size(w)) / 2;
    let frames = crop_and_resize(clip, top, left);
    VideoClip::new(frames, clip.frame_rate()).expect("cropping preserves validity")
}
