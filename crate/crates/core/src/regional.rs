//! Rectangular mask geometry and the three regional strategies.
//!
//! * ViewMix: `out = M * view_a + (1 - M) * view_b`, both views of the same
//!   source image. `M` is 0 inside the box.
//! * Cutout: the box is filled with a constant.
//! * CutMix: the box comes from a different source image.
//!
//! All three are pure selection; no sample is blended.

use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::image::{unit_to_u8, Image, Pixels};
use crate::rng::RngStream;

/// Half-open pixel rectangle `[left, right) x [top, bottom)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rect {
    pub left: usize,
    pub top: usize,
    pub right: usize,
    pub bottom: usize,
}

impl Rect {
    pub fn new(left: usize, top: usize, right: usize, bottom: usize) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> usize {
        self.right.saturating_sub(self.left)
    }

    pub fn height(&self) -> usize {
        self.bottom.saturating_sub(self.top)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.left && x < self.right && y >= self.top && y < self.bottom
    }
}

/// How `[r_min, r_max]` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMode {
    /// `lambda ~ U[r_min, r_max]` scales box width and height.
    #[default]
    Linear,
    /// `a ~ U[r_min, r_max]` is the box area fraction; `lambda = sqrt(a)`.
    Area,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub image_width: usize,
    pub image_height: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub lambda: f64,
    pub nominal_w: usize,
    pub nominal_h: usize,
    /// Nominal box before clipping; may extend past the image.
    pub nominal_left: i64,
    pub nominal_top: i64,
    pub clipped: Rect,
}

#[inline]
fn round_half_up(v: f64) -> f64 {
    libm::floor(v + 0.5)
}

/// Clips `[start, start + len)` to `[0, limit)`, shifting inward to keep one
/// pixel when the intersection is empty.
fn clip_span(start: i64, len: usize, limit: usize) -> (usize, usize) {
    let limit_i = limit as i64;
    let lo = start.clamp(0, limit_i);
    let hi = (start + len as i64).clamp(0, limit_i);
    if hi > lo {
        (lo as usize, hi as usize)
    } else if start >= limit_i {
        (limit - 1, limit)
    } else {
        (0, 1)
    }
}

impl BBox {
    /// Box for a given `lambda` and center; the deterministic half of
    /// [`sample_bbox`].
    pub fn from_center(width: usize, height: usize, lambda: f64, center_x: f64, center_y: f64) -> Self {
        let nominal_w = (round_half_up(lambda * width as f64) as usize).max(1);
        let nominal_h = (round_half_up(lambda * height as f64) as usize).max(1);
        let nominal_left = round_half_up(center_x - nominal_w as f64 / 2.0) as i64;
        let nominal_top = round_half_up(center_y - nominal_h as f64 / 2.0) as i64;
        let (left, right) = clip_span(nominal_left, nominal_w, width);
        let (top, bottom) = clip_span(nominal_top, nominal_h, height);
        Self {
            image_width: width,
            image_height: height,
            center_x,
            center_y,
            lambda,
            nominal_w,
            nominal_h,
            nominal_left,
            nominal_top,
            clipped: Rect::new(left, top, right, bottom),
        }
    }

    pub fn clipped_area(&self) -> usize {
        self.clipped.area()
    }

    /// Clipped area over image area.
    pub fn area_fraction(&self) -> f64 {
        self.clipped_area() as f64 / (self.image_width * self.image_height) as f64
    }

    pub fn mask(&self) -> Mask {
        Mask::from_rect(self.image_width, self.image_height, self.clipped)
    }

    fn check(&self, img: &Image) -> Result<()> {
        if (img.width(), img.height()) != (self.image_width, self.image_height) {
            return Err(Error::ShapeMismatch {
                expected: (self.image_width, self.image_height, img.channels()),
                found: img.shape(),
            });
        }
        Ok(())
    }
}

pub fn validate_ratio_range(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min > 0.0 && r_min <= r_max && r_max < 1.0) {
        return Err(param(alloc::format!(
            "need 0 < r_min <= r_max < 1, got r_min={r_min} r_max={r_max}"
        )));
    }
    Ok(())
}

/// `lambda` per `mode`, then `b_x ~ U[0, W)`, `b_y ~ U[0, H)`.
pub fn sample_bbox(
    width: usize,
    height: usize,
    r_min: f64,
    r_max: f64,
    mode: LambdaMode,
    rng: &mut RngStream,
) -> Result<BBox> {
    validate_ratio_range(r_min, r_max)?;
    if width == 0 || height == 0 {
        return Err(param("image dimensions must be at least 1x1"));
    }
    let r = rng.uniform_range(r_min, r_max);
    let lambda = match mode {
        LambdaMode::Linear => r,
        LambdaMode::Area => libm::sqrt(r),
    };
    let cx = rng.uniform() * width as f64;
    let cy = rng.uniform() * height as f64;
    Ok(BBox::from_center(width, height, lambda, cx, cy))
}

/// Binary mask: 0 inside `rect`, 1 elsewhere (reversed when `inverted`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub rect: Rect,
    pub inverted: bool,
}

impl Mask {
    pub fn from_rect(width: usize, height: usize, rect: Rect) -> Self {
        Self {
            width,
            height,
            rect,
            inverted: false,
        }
    }

    pub fn all_ones(width: usize, height: usize) -> Self {
        Self::from_rect(width, height, Rect::default())
    }

    pub fn all_zeros(width: usize, height: usize) -> Self {
        Self::from_rect(width, height, Rect::new(0, 0, width, height))
    }

    pub fn complement(&self) -> Self {
        Self {
            inverted: !self.inverted,
            ..*self
        }
    }

    pub fn value(&self, x: usize, y: usize) -> u8 {
        let inside = self.rect.contains(x, y);
        (inside == self.inverted) as u8
    }

    pub fn rasterize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.value(x, y));
            }
        }
        out
    }

    pub fn zero_count(&self) -> usize {
        let inside = self.rect.area();
        if self.inverted {
            self.width * self.height - inside
        } else {
            inside
        }
    }
}

fn paste_rect<T: Copy>(dst: &mut [T], src: &[T], width: usize, channels: usize, rect: Rect) {
    if rect.is_empty() {
        return;
    }
    let stride = width * channels;
    let (x0, x1) = (rect.left * channels, rect.right * channels);
    for y in rect.top..rect.bottom {
        let row = y * stride;
        dst[row + x0..row + x1].copy_from_slice(&src[row + x0..row + x1]);
    }
}

/// `out = base` with `rect` copied from `patch`.
fn select(base: &Image, patch: &Image, rect: Rect) -> Image {
    let mut out = base.clone();
    let (w, c) = (base.width(), base.channels());
    match (&mut out.pixels, &patch.pixels) {
        (Pixels::U8(d), Pixels::U8(s)) => paste_rect(d, s, w, c, rect),
        (Pixels::F32(d), Pixels::F32(s)) => paste_rect(d, s, w, c, rect),
        _ => unreachable!("depths checked by caller"),
    }
    out
}

/// `M * view_a + (1 - M) * view_b` as pure per-pixel selection.
pub fn viewmix(view_a: &Image, view_b: &Image, mask: &Mask) -> Result<Image> {
    view_a.same_shape(view_b)?;
    if (mask.width, mask.height) != (view_a.width(), view_a.height()) {
        return Err(Error::ShapeMismatch {
            expected: view_a.shape(),
            found: (mask.width, mask.height, view_a.channels()),
        });
    }
    let rect = Rect::new(
        mask.rect.left.min(mask.width),
        mask.rect.top.min(mask.height),
        mask.rect.right.min(mask.width),
        mask.rect.bottom.min(mask.height),
    );
    Ok(if mask.inverted {
        select(view_b, view_a, rect)
    } else {
        select(view_a, view_b, rect)
    })
}

/// Fills the clipped box with `fill` (unit range, quantized for bytes).
pub fn cutout(img: &Image, bbox: &BBox, fill: f32) -> Result<Image> {
    bbox.check(img)?;
    if !(0.0..=1.0).contains(&fill) {
        return Err(param("cutout fill must lie in [0, 1]"));
    }
    let mut out = img.clone();
    let (w, c) = (img.width(), img.channels());
    let rect = bbox.clipped;
    let stride = w * c;
    match &mut out.pixels {
        Pixels::U8(d) => {
            let v = unit_to_u8(fill);
            for y in rect.top..rect.bottom {
                d[y * stride + rect.left * c..y * stride + rect.right * c].fill(v);
            }
        }
        Pixels::F32(d) => {
            for y in rect.top..rect.bottom {
                d[y * stride + rect.left * c..y * stride + rect.right * c].fill(fill);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutMixOutput {
    pub image: Image,
    /// Clipped area over image area: the label-mixing weight.
    pub area_ratio: f64,
}

/// Replaces the clipped box of `img_a` with the co-located patch of `img_b`.
pub fn cutmix(img_a: &Image, img_b: &Image, bbox: &BBox) -> Result<CutMixOutput> {
    img_a.same_shape(img_b)?;
    bbox.check(img_a)?;
    Ok(CutMixOutput {
        image: select(img_a, img_b, bbox.clipped),
        area_ratio: bbox.area_fraction(),
    })
}
