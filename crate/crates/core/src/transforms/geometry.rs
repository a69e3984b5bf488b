use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::image::{crop_resize, Image, Pixels};
use crate::rng::RngStream;

const CROP_ATTEMPTS: usize = 10;

/// Crop rectangle chosen by [`sample_crop_window`], in source pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
    /// Sampled area fraction and aspect ratio; `None` for the center fallback.
    pub area: Option<f64>,
    pub aspect: Option<f64>,
}

#[inline]
fn round_half_up(v: f64) -> f64 {
    libm::floor(v + 0.5)
}

/// Crop side lengths `(w, h)` for area fraction `area` and aspect `w / h`.
pub fn crop_dims(width: usize, height: usize, area: f64, aspect: f64) -> (usize, usize) {
    let target = area * (width * height) as f64;
    let w = round_half_up(libm::sqrt(target * aspect));
    let h = round_half_up(libm::sqrt(target / aspect));
    (w.max(0.0) as usize, h.max(0.0) as usize)
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
        return Err(param(alloc::format!("{name} [{}, {}] is not a valid range", r[0], r[1])));
    }
    Ok(())
}

pub(crate) fn validate_crop(area_range: [f64; 2], aspect_range: [f64; 2]) -> Result<()> {
    check_range("area_range", area_range)?;
    check_range("aspect_range", aspect_range)?;
    if area_range[0] <= 0.0 || area_range[1] > 1.0 {
        return Err(param("crop area fractions must lie in (0, 1]"));
    }
    if aspect_range[0] <= 0.0 {
        return Err(param("crop aspect ratios must be positive"));
    }
    Ok(())
}

/// Draws a crop window: area `a ~ U(area_range)`, aspect `r ~ U(aspect_range)`,
/// top-left uniform over valid positions. After ten misses it falls back to
/// the largest centered crop whose aspect lies in `aspect_range`.
pub fn sample_crop_window(
    width: usize,
    height: usize,
    area_range: [f64; 2],
    aspect_range: [f64; 2],
    rng: &mut RngStream,
) -> Result<CropWindow> {
    validate_crop(area_range, aspect_range)?;
    for _ in 0..CROP_ATTEMPTS {
        let area = rng.uniform_range(area_range[0], area_range[1]);
        let aspect = rng.uniform_range(aspect_range[0], aspect_range[1]);
        let (w, h) = crop_dims(width, height, area, aspect);
        if w >= 1 && h >= 1 && w <= width && h <= height {
            let top = rng.below((height - h + 1) as u64) as usize;
            let left = rng.below((width - w + 1) as u64) as usize;
            return Ok(CropWindow {
                left,
                top,
                width: w,
                height: h,
                area: Some(area),
                aspect: Some(aspect),
            });
        }
    }
    let in_ratio = width as f64 / height as f64;
    let (w, h) = if in_ratio < aspect_range[0] {
        let h = round_half_up(width as f64 / aspect_range[0]) as usize;
        (width, h.clamp(1, height))
    } else if in_ratio > aspect_range[1] {
        let w = round_half_up(height as f64 * aspect_range[1]) as usize;
        (w.clamp(1, width), height)
    } else {
        (width, height)
    };
    Ok(CropWindow {
        left: (width - w) / 2,
        top: (height - h) / 2,
        width: w,
        height: h,
        area: None,
        aspect: None,
    })
}

/// Random resized crop rescaled bilinearly to `out_size x out_size`.
pub fn crop_rescale(
    img: &Image,
    rng: &mut RngStream,
    area_range: [f64; 2],
    aspect_range: [f64; 2],
    out_size: usize,
) -> Result<Image> {
    if out_size == 0 {
        return Err(param("out_size must be at least 1"));
    }
    let window = sample_crop_window(img.width(), img.height(), area_range, aspect_range, rng)?;
    apply_crop_window(img, &window, out_size)
}

pub fn apply_crop_window(img: &Image, window: &CropWindow, out_size: usize) -> Result<Image> {
    crop_resize(
        img,
        (window.left, window.top, window.width, window.height),
        out_size,
        out_size,
    )
}

fn flip_rows<T: Copy>(src: &[T], width: usize, channels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for row in src.chunks_exact(width * channels) {
        for px in row.chunks_exact(channels).rev() {
            out.extend_from_slice(px);
        }
    }
    out
}

/// Mirrors columns: `c -> width - 1 - c`.
pub fn horizontal_flip(img: &Image) -> Image {
    let pixels = match img.pixels() {
        Pixels::U8(v) => Pixels::U8(flip_rows(v, img.width(), img.channels())),
        Pixels::F32(v) => Pixels::F32(flip_rows(v, img.width(), img.channels())),
    };
    Image {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn crop_side_for_three_quarters() {
        assert_eq!(crop_dims(32, 32, 0.75, 1.0), (28, 28));
    }

    #[test]
    fn crop_side_matches_nearest_integer_search() {
        // Integer side whose squared area ratio is closest to the target.
        for &a in &[0.75, 0.8, 0.9, 0.61, 1.0] {
            let best = (1..=32usize)
                .min_by(|&x, &y| {
                    let dx = ((x * x) as f64 / 1024.0 - a).abs();
                    let dy = ((y * y) as f64 / 1024.0 - a).abs();
                    dx.partial_cmp(&dy).unwrap()
                })
                .unwrap();
            let (w, h) = crop_dims(32, 32, a, 1.0);
            assert_eq!(w, h);
            assert!(w.abs_diff(best) <= 1, "a={a} w={w} best={best}");
        }
        assert_eq!(crop_dims(32, 32, 0.75, 1.0).0, 28);
    }

    #[test]
    fn full_area_unit_aspect_is_identity() {
        let data: Vec<u8> = (0..(8 * 8 * 3)).map(|i| (i * 7 % 256) as u8).collect();
        let img = Image::from_u8(8, 8, 3, data).unwrap();
        let mut rng = RngStream::new(1);
        let out = crop_rescale(&img, &mut rng, [1.0, 1.0], [1.0, 1.0], 8).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn zero_out_size_is_rejected() {
        let img = Image::filled(4, 4, 3, crate::Depth::U8, 0.0);
        let mut rng = RngStream::new(1);
        assert!(crop_rescale(&img, &mut rng, [0.75, 1.0], [0.75, 1.33], 0).is_err());
    }

    #[test]
    fn impossible_aspect_falls_back_to_center() {
        let mut rng = RngStream::new(4);
        // A 1x20 strip cannot host an aspect-10 crop of any sampled area.
        let w = sample_crop_window(1, 20, [0.9, 1.0], [10.0, 12.0], &mut rng).unwrap();
        assert_eq!(w.area, None);
        assert!(w.width <= 1 && w.height <= 20 && w.width >= 1 && w.height >= 1);
    }

    #[test]
    fn flip_small_example() {
        let img = Image::from_u8(2, 1, 1, vec![10, 20]).unwrap();
        assert_eq!(horizontal_flip(&img).as_u8().unwrap(), &[20, 10]);
        let rgb = Image::from_u8(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(horizontal_flip(&rgb).as_u8().unwrap(), &[4, 5, 6, 1, 2, 3]);
    }

    #[test]
    fn flip_keeps_column_constant_image() {
        let img = Image::from_u8(3, 2, 1, vec![5, 5, 5, 9, 9, 9]).unwrap();
        assert_eq!(horizontal_flip(&img), img);
    }
}
