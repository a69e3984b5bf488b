//! Owned pixel buffers.
//!
//! Samples are interleaved row-major (`(y * width + x) * channels + c`).
//! Byte images hold `[0, 255]`; float images hold unit-range `[0.0, 1.0]`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Depth {
    U8,
    F32,
}

impl Depth {
    /// Largest representable sample, in native units.
    pub fn max_value(self) -> f32 {
        match self {
            Depth::U8 => 255.0,
            Depth::F32 => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl Pixels {
    pub fn len(&self) -> usize {
        match self {
            Pixels::U8(v) => v.len(),
            Pixels::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn depth(&self) -> Depth {
        match self {
            Pixels::U8(_) => Depth::U8,
            Pixels::F32(_) => Depth::F32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) channels: usize,
    pub(crate) pixels: Pixels,
}

#[inline(always)]
pub(crate) fn u8_to_unit(s: u8) -> f32 {
    s as f32 / 255.0
}

/// Round half up, clamped to the byte range.
#[inline(always)]
pub(crate) fn unit_to_u8(s: f32) -> u8 {
    round_byte(s * 255.0)
}

/// `floor(v + 0.5)` clamped to `[0, 255]`; NaN maps to 0. After the clamp,
/// truncation is floor.
#[inline(always)]
pub(crate) fn round_byte(v: f32) -> u8 {
    // `max` discards NaN, so `x` is finite and in [0, 255]. The checked
    // cast blocks vectorization of the surrounding loops.
    let x = (v + 0.5).max(0.0).min(255.0);
    // SAFETY: `x` is finite and representable as i32.
    unsafe { x.to_int_unchecked::<i32>() as u8 }
}

#[inline(always)]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Pixels) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(param("image dimensions must be at least 1x1"));
        }
        if channels != 1 && channels != 3 {
            return Err(param(alloc::format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(Error::Format(alloc::format!(
                "buffer holds {} samples, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        if let Pixels::F32(v) = &pixels {
            if let Some(bad) = v.iter().position(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::Format(alloc::format!(
                    "float sample {} at index {bad} is outside [0, 1]",
                    v[bad]
                )));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, channels, Pixels::U8(data))
    }

    pub fn from_f32(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(width, height, channels, Pixels::F32(data))
    }

    /// Constant image; `value` is in unit range and is quantized for bytes.
    pub fn filled(width: usize, height: usize, channels: usize, depth: Depth, value: f32) -> Self {
        let n = width * height * channels;
        let value = clamp_unit(value);
        let pixels = match depth {
            Depth::U8 => Pixels::U8(alloc::vec![unit_to_u8(value); n]),
            Depth::F32 => Pixels::F32(alloc::vec![value; n]),
        };
        Self {
            width,
            height,
            channels,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn depth(&self) -> Depth {
        self.pixels.depth()
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    pub fn into_pixels(self) -> Pixels {
        self.pixels
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.pixels {
            Pixels::U8(v) => Some(v),
            Pixels::F32(_) => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.pixels {
            Pixels::F32(v) => Some(v),
            Pixels::U8(_) => None,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.pixels.len()
    }

    /// Sample at flat index, in unit range regardless of depth.
    pub fn sample_unit(&self, index: usize) -> f32 {
        match &self.pixels {
            Pixels::U8(v) => u8_to_unit(v[index]),
            Pixels::F32(v) => v[index],
        }
    }

    /// Samples of pixel `(x, y)` in unit range.
    pub fn pixel_unit(&self, x: usize, y: usize) -> Vec<f32> {
        let base = (y * self.width + x) * self.channels;
        (base..base + self.channels)
            .map(|i| self.sample_unit(i))
            .collect()
    }

    pub fn to_depth(&self, target: Depth) -> Image {
        convert_depth(self, target)
    }

    pub(crate) fn same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        if self.depth() != other.depth() {
            return Err(Error::DepthMismatch);
        }
        Ok(())
    }

    pub(crate) fn into_f32_vec(self) -> Vec<f32> {
        match self.pixels {
            Pixels::F32(v) => v,
            Pixels::U8(v) => v.into_iter().map(u8_to_unit).collect(),
        }
    }
}

/// Byte samples map to `s / 255`; float samples map to `round_half_up(s * 255)`.
pub fn convert_depth(img: &Image, target: Depth) -> Image {
    let pixels = match (&img.pixels, target) {
        (Pixels::U8(v), Depth::U8) => Pixels::U8(v.clone()),
        (Pixels::F32(v), Depth::F32) => Pixels::F32(v.clone()),
        (Pixels::U8(v), Depth::F32) => Pixels::F32(v.iter().map(|&s| u8_to_unit(s)).collect()),
        (Pixels::F32(v), Depth::U8) => Pixels::U8(v.iter().map(|&s| unit_to_u8(s)).collect()),
    };
    Image {
        width: img.width,
        height: img.height,
        channels: img.channels,
        pixels,
    }
}

pub(crate) trait Sample: Copy + Send + Sync + 'static {
    fn to_f32(self) -> f32;
    fn from_f32(v: f32) -> Self;
}

impl Sample for u8 {
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self as f32
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        round_byte(v)
    }
}

impl Sample for f32 {
    #[inline(always)]
    fn to_f32(self) -> f32 {
        self
    }
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        clamp_unit(v)
    }
}

#[derive(Clone, Copy)]
struct Tap {
    i0: usize,
    i1: usize,
    w: f32,
}

/// Half-pixel-center bilinear taps mapping `out` destination samples onto
/// the source span `[offset, offset + len)`.
fn taps(offset: usize, len: usize, out: usize) -> Vec<Tap> {
    let scale = len as f64 / out as f64;
    (0..out)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let mut i0 = libm::floor(src) as usize;
            if i0 > len - 1 {
                i0 = len - 1;
            }
            let i1 = (i0 + 1).min(len - 1);
            let w = (src - i0 as f64) as f32;
            let w = if i1 == i0 { 0.0 } else { w };
            Tap {
                i0: offset + i0,
                i1: offset + i1,
                w,
            }
        })
        .collect()
}

fn lerp_row<T: Sample, const C: usize>(src: &[T], xt: &[Tap], out: &mut [f32]) {
    for (tx, o) in xt.iter().zip(out.chunks_exact_mut(C)) {
        let (a0, a1) = (&src[tx.i0..tx.i0 + C], &src[tx.i1..tx.i1 + C]);
        for c in 0..C {
            let (a0, a1) = (a0[c].to_f32(), a1[c].to_f32());
            o[c] = a0 + (a1 - a0) * tx.w;
        }
    }
}

/// Separable form: each source row is interpolated horizontally once, then
/// pairs of rows are blended vertically.
fn crop_resize_c<T: Sample, const C: usize>(
    src: &[T],
    width: usize,
    region: (usize, usize, usize, usize),
    out_w: usize,
    out_h: usize,
) -> Vec<T> {
    let (left, top, w, h) = region;
    let xt: Vec<Tap> = taps(left, w, out_w)
        .into_iter()
        .map(|t| Tap {
            i0: t.i0 * C,
            i1: t.i1 * C,
            w: t.w,
        })
        .collect();
    let yt = taps(top, h, out_h);
    let stride = width * C;
    let row_len = out_w * C;
    let mut out = Vec::with_capacity(row_len * out_h);
    // Two cached horizontal rows, tagged with their source row index.
    let mut rows = [alloc::vec![0f32; row_len], alloc::vec![0f32; row_len]];
    let mut tags = [usize::MAX; 2];
    let fetch = |y: usize, rows: &mut [Vec<f32>; 2], tags: &mut [usize; 2]| -> usize {
        if let Some(k) = tags.iter().position(|&t| t == y) {
            return k;
        }
        // Source rows only move forward, so the lower (or empty) slot is stale.
        let k = match *tags {
            [usize::MAX, _] => 0,
            [_, usize::MAX] => 1,
            [a, b] => usize::from(b < a),
        };
        lerp_row::<T, C>(&src[y * stride..(y + 1) * stride], &xt, &mut rows[k]);
        tags[k] = y;
        k
    };
    for ty in &yt {
        let k0 = fetch(ty.i0, &mut rows, &mut tags);
        let k1 = fetch(ty.i1, &mut rows, &mut tags);
        out.extend(
            rows[k0]
                .iter()
                .zip(&rows[k1])
                .map(|(&t, &b)| T::from_f32(t + (b - t) * ty.w)),
        );
    }
    out
}

fn crop_resize_samples<T: Sample>(
    src: &[T],
    width: usize,
    channels: usize,
    region: (usize, usize, usize, usize),
    out_w: usize,
    out_h: usize,
) -> Vec<T> {
    match channels {
        1 => crop_resize_c::<T, 1>(src, width, region, out_w, out_h),
        _ => crop_resize_c::<T, 3>(src, width, region, out_w, out_h),
    }
}

/// Crops `region = (left, top, width, height)` and rescales it bilinearly to
/// `out_w x out_h`, keeping the input depth.
pub fn crop_resize(
    img: &Image,
    region: (usize, usize, usize, usize),
    out_w: usize,
    out_h: usize,
) -> Result<Image> {
    let (left, top, w, h) = region;
    if out_w == 0 || out_h == 0 {
        return Err(param("output size must be at least 1"));
    }
    if w == 0 || h == 0 || left + w > img.width || top + h > img.height {
        return Err(param(alloc::format!(
            "crop region {w}x{h}+{left}+{top} does not fit a {}x{} image",
            img.width,
            img.height
        )));
    }
    let pixels = match &img.pixels {
        Pixels::U8(v) => Pixels::U8(crop_resize_samples(
            v,
            img.width,
            img.channels,
            region,
            out_w,
            out_h,
        )),
        Pixels::F32(v) => Pixels::F32(crop_resize_samples(
            v,
            img.width,
            img.channels,
            region,
            out_w,
            out_h,
        )),
    };
    Ok(Image {
        width: out_w,
        height: out_h,
        channels: img.channels,
        pixels,
    })
}

/// Whole-image bilinear resize.
pub fn resize_bilinear(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    if img.width == out_w && img.height == out_h {
        return Ok(img.clone());
    }
    crop_resize(img, (0, 0, img.width, img.height), out_w, out_h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSource {
    pub path: String,
    pub format: String,
}

/// Non-empty, shape-homogeneous list of labeled images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<LabeledImage>,
    source: DatasetSource,
}

impl Dataset {
    pub fn new(items: Vec<LabeledImage>, source: DatasetSource) -> Result<Self> {
        let first = items.first().ok_or(Error::Empty("dataset"))?;
        let shape = first.image.shape();
        for (i, item) in items.iter().enumerate() {
            if item.image.shape() != shape {
                return Err(Error::Format(alloc::format!(
                    "item {i} is {}x{}x{}, dataset is {}x{}x{}",
                    item.image.width,
                    item.image.height,
                    item.image.channels,
                    shape.0,
                    shape.1,
                    shape.2
                )));
            }
        }
        Ok(Self { items, source })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn get(&self, index: usize) -> Result<&LabeledImage> {
        self.items.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.items.len(),
        })
    }

    pub fn image(&self, index: usize) -> Result<&Image> {
        self.get(index).map(|item| &item.image)
    }

    /// `(width, height, channels)` shared by every item.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.items[0].image.shape()
    }

    pub fn source(&self) -> &DatasetSource {
        &self.source
    }

    pub fn into_items(self) -> Vec<LabeledImage> {
        self.items
    }
}
