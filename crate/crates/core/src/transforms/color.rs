//! Point-wise color operations. All arithmetic happens in unit-float; the
//! public wrappers hand back the caller's depth.

use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::image::{clamp_unit, Depth, Image, Pixels};
use crate::rng::RngStream;

const WG: f32 = 0.587;
const WB: f32 = 0.114;

/// ITU-R 601 luma `0.299 r + 0.587 g + 0.114 b`, written so that
/// `r == g == b` returns `r` exactly.
#[inline(always)]
pub(crate) fn luma(r: f32, g: f32, b: f32) -> f32 {
    r + WG * (g - r) + WB * (b - r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterStrengths {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl Default for JitterStrengths {
    fn default() -> Self {
        Self {
            brightness: 0.8,
            contrast: 0.8,
            saturation: 0.8,
            hue: 0.2,
        }
    }
}

impl JitterStrengths {
    pub fn validate(&self) -> Result<()> {
        let all = [self.brightness, self.contrast, self.saturation, self.hue];
        if all.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(param("jitter strengths must be non-negative"));
        }
        if self.hue > 0.5 {
            return Err(param("hue strength must not exceed 0.5"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterOp {
    Brightness,
    Contrast,
    Saturation,
    Hue,
}

/// Sampled factors plus the order in which they are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub order: [JitterOp; 4],
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub hue: f32,
}

fn factor(rng: &mut RngStream, strength: f64) -> f32 {
    rng.uniform_range((1.0 - strength).max(0.0), 1.0 + strength) as f32
}

pub fn sample_jitter(rng: &mut RngStream, strengths: &JitterStrengths) -> Result<JitterParams> {
    strengths.validate()?;
    let mut order = [
        JitterOp::Brightness,
        JitterOp::Contrast,
        JitterOp::Saturation,
        JitterOp::Hue,
    ];
    rng.shuffle(&mut order);
    Ok(JitterParams {
        order,
        brightness: factor(rng, strengths.brightness),
        contrast: factor(rng, strengths.contrast),
        saturation: factor(rng, strengths.saturation),
        hue: rng.uniform_range(-strengths.hue, strengths.hue) as f32,
    })
}

pub(crate) fn brightness_in_place(buf: &mut [f32], f: f32) {
    if f == 1.0 {
        return;
    }
    for s in buf {
        *s = clamp_unit(*s * f);
    }
}

fn mean_luma(buf: &[f32], channels: usize) -> f32 {
    let sum: f64 = if channels == 3 {
        buf.chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]) as f64)
            .sum()
    } else {
        buf.iter().map(|&s| s as f64).sum()
    };
    (sum / (buf.len() / channels) as f64) as f32
}

pub(crate) fn contrast_in_place(buf: &mut [f32], channels: usize, f: f32) {
    if f == 1.0 {
        return;
    }
    let mean = mean_luma(buf, channels);
    let offset = (1.0 - f) * mean;
    for s in buf {
        *s = clamp_unit(f * *s + offset);
    }
}

pub(crate) fn saturation_in_place(buf: &mut [f32], channels: usize, f: f32) {
    if f == 1.0 || channels != 3 {
        return;
    }
    let g = 1.0 - f;
    for p in buf.chunks_exact_mut(3) {
        let l = g * luma(p[0], p[1], p[2]);
        p[0] = clamp_unit(f * p[0] + l);
        p[1] = clamp_unit(f * p[1] + l);
        p[2] = clamp_unit(f * p[2] + l);
    }
}

/// Wraps a value in `[0, 12)` into `[0, 6)`.
#[inline(always)]
fn wrap6(x: f32) -> f32 {
    if x >= 6.0 {
        x - 6.0
    } else {
        x
    }
}

/// Rotates hue by `shift` (fraction of the full circle) through HSV.
pub(crate) fn hue_in_place(buf: &mut [f32], channels: usize, shift: f32) {
    if shift == 0.0 || channels != 3 {
        return;
    }
    // Shift in sextants, brought into [0, 6).
    let shift6 = {
        let t = shift * 6.0;
        let w = t - 6.0 * ((t / 6.0) as i32 as f32);
        if w < 0.0 {
            w + 6.0
        } else {
            w
        }
    };
    // Written without early exits so the loop stays branch-light. An
    // achromatic pixel has delta = 0 and comes back unchanged.
    for p in buf.chunks_exact_mut(3) {
        let (r, g, b) = (p[0], p[1], p[2]);
        let v = r.max(g).max(b);
        let delta = v - r.min(g).min(b);
        let inv = if delta > 0.0 { 1.0 / delta } else { 0.0 };
        // Hue in sextants, in [-1, 5).
        let (num, base) = if v == r {
            (g - b, 0.0)
        } else if v == g {
            (b - r, 2.0)
        } else {
            (r - g, 4.0)
        };
        let h = base + num * inv + shift6;
        let h = wrap6(if h < 0.0 { h + 6.0 } else { h });
        // f(n) = v - delta * clamp(min(k, 4 - k), 0, 1), k = (n + h) mod 6.
        let f = |n: f32| {
            let k = wrap6(n + h);
            clamp_unit(v - delta * k.min(4.0 - k).max(0.0).min(1.0))
        };
        p[0] = f(5.0);
        p[1] = f(3.0);
        p[2] = f(1.0);
    }
}

pub(crate) fn jitter_in_place(buf: &mut [f32], channels: usize, params: &JitterParams) {
    for op in params.order {
        match op {
            JitterOp::Brightness => brightness_in_place(buf, params.brightness),
            JitterOp::Contrast => contrast_in_place(buf, channels, params.contrast),
            JitterOp::Saturation => saturation_in_place(buf, channels, params.saturation),
            JitterOp::Hue => hue_in_place(buf, channels, params.hue),
        }
    }
}

pub(crate) fn grayscale_in_place(buf: &mut [f32], channels: usize) {
    if channels != 3 {
        return;
    }
    for p in buf.chunks_exact_mut(3) {
        let l = clamp_unit(luma(p[0], p[1], p[2]));
        p[0] = l;
        p[1] = l;
        p[2] = l;
    }
}

/// Runs `f` on a unit-float copy of `img` and converts back to its depth.
fn in_unit_float(img: &Image, f: impl FnOnce(&mut [f32], usize)) -> Image {
    let depth = img.depth();
    let channels = img.channels();
    let mut work = img.clone().into_f32_vec();
    f(&mut work, channels);
    let float = Image {
        width: img.width(),
        height: img.height(),
        channels,
        pixels: Pixels::F32(work),
    };
    match depth {
        Depth::F32 => float,
        Depth::U8 => float.to_depth(Depth::U8),
    }
}

pub fn adjust_brightness(img: &Image, factor: f32) -> Image {
    in_unit_float(img, |b, _| brightness_in_place(b, factor))
}

/// Blends every sample toward the mean luma of the image.
pub fn adjust_contrast(img: &Image, factor: f32) -> Image {
    in_unit_float(img, |b, c| contrast_in_place(b, c, factor))
}

/// Blends every pixel toward its own luma.
pub fn adjust_saturation(img: &Image, factor: f32) -> Image {
    in_unit_float(img, |b, c| saturation_in_place(b, c, factor))
}

pub fn adjust_hue(img: &Image, shift: f32) -> Image {
    in_unit_float(img, |b, c| hue_in_place(b, c, shift))
}

pub fn color_jitter(img: &Image, rng: &mut RngStream, strengths: &JitterStrengths) -> Result<Image> {
    let params = sample_jitter(rng, strengths)?;
    Ok(apply_jitter(img, &params))
}

pub fn apply_jitter(img: &Image, params: &JitterParams) -> Image {
    in_unit_float(img, |b, c| jitter_in_place(b, c, params))
}

/// Sets every channel to the 601 luma; single-channel input is returned as is.
pub fn grayscale(img: &Image) -> Image {
    if img.channels() != 3 {
        return img.clone();
    }
    in_unit_float(img, grayscale_in_place)
}

fn solarize_samples<T: Copy + PartialOrd>(v: &[T], threshold: T, invert: impl Fn(T) -> T) -> Vec<T> {
    v.iter()
        .map(|&s| if s >= threshold { invert(s) } else { s })
        .collect()
}

/// `s -> max - s` for `s >= threshold`. The threshold is in the image's
/// native scale (128 for bytes, 0.5 for floats).
pub fn solarize(img: &Image, threshold: f32) -> Image {
    let pixels = match img.pixels() {
        Pixels::U8(v) => {
            // Compare in float so fractional thresholds (127.5) behave.
            let out = v
                .iter()
                .map(|&s| if s as f32 >= threshold { 255 - s } else { s })
                .collect();
            Pixels::U8(out)
        }
        Pixels::F32(v) => Pixels::F32(solarize_samples(v, threshold, |s| 1.0 - s)),
    };
    Image {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        pixels,
    }
}
