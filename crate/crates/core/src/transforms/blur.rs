use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::image::{clamp_unit, Depth, Image, Pixels};
use crate::rng::RngStream;

/// Normalized 1-D Gaussian of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = libm::ceil(3.0 * sigma) as i64;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|d| libm::exp(-((d * d) as f64) / denom))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| (w / total) as f32).collect()
}

pub(crate) fn validate_sigma_range(r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] <= 0.0 || r[0] > r[1] {
        return Err(param(alloc::format!(
            "sigma range [{}, {}] must be positive and ordered",
            r[0],
            r[1]
        )));
    }
    Ok(())
}

/// Separable blur with replicate-edge padding, horizontal pass first.
/// Taps accumulate `w * (s - center)`, so flat regions come back bit-exact.
pub(crate) fn blur_in_place(buf: &mut [f32], width: usize, height: usize, channels: usize, sigma: f64) {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let stride = width * channels;

    // Horizontal: pad each row by replicating its edge pixels.
    let mut padded = alloc::vec![0f32; (width + 2 * radius) * channels];
    let mut tmp = alloc::vec![0f32; buf.len()];
    for (row, out) in buf.chunks_exact(stride).zip(tmp.chunks_exact_mut(stride)) {
        let first = &row[..channels];
        let last = &row[stride - channels..];
        for p in 0..radius {
            padded[p * channels..(p + 1) * channels].copy_from_slice(first);
            let q = radius + width + p;
            padded[q * channels..(q + 1) * channels].copy_from_slice(last);
        }
        padded[radius * channels..(radius + width) * channels].copy_from_slice(row);
        for (k, &w) in kernel.iter().enumerate() {
            let src = &padded[k * channels..k * channels + stride];
            for ((o, &s), &c) in out.iter_mut().zip(src).zip(row) {
                *o += w * (s - c);
            }
        }
        for (o, &c) in out.iter_mut().zip(row) {
            *o += c;
        }
    }

    // Vertical: accumulate whole rows with clamped row indices.
    let mut acc = alloc::vec![0f32; stride];
    for y in 0..height {
        let center = &tmp[y * stride..(y + 1) * stride];
        acc.fill(0.0);
        for (k, &w) in kernel.iter().enumerate() {
            let sy = (y + k).saturating_sub(radius).min(height - 1);
            let src = &tmp[sy * stride..(sy + 1) * stride];
            for ((a, &s), &c) in acc.iter_mut().zip(src).zip(center) {
                *a += w * (s - c);
            }
        }
        let out = &mut buf[y * stride..(y + 1) * stride];
        for ((o, &a), &c) in out.iter_mut().zip(&acc).zip(center) {
            *o = clamp_unit(c + a);
        }
    }
}

/// Deterministic blur at a fixed `sigma`; output keeps the input depth.
pub fn blur_with_sigma(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(param("sigma must be positive"));
    }
    let depth = img.depth();
    let mut work = img.clone().into_f32_vec();
    blur_in_place(&mut work, img.width(), img.height(), img.channels(), sigma);
    let out = Image {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        pixels: Pixels::F32(work),
    };
    Ok(match depth {
        Depth::F32 => out,
        Depth::U8 => out.to_depth(Depth::U8),
    })
}

/// `sigma ~ U(sigma_range)`, then [`blur_with_sigma`].
pub fn gaussian_blur(img: &Image, rng: &mut RngStream, sigma_range: [f64; 2]) -> Result<Image> {
    validate_sigma_range(sigma_range)?;
    let sigma = rng.uniform_range(sigma_range[0], sigma_range[1]);
    blur_with_sigma(img, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_radius_and_normalization() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        let sum: f32 = k.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert_eq!(gaussian_kernel(0.1).len(), 3);
        assert_eq!(gaussian_kernel(2.0).len(), 13);
    }

    #[test]
    fn constant_image_unchanged() {
        let img = Image::filled(9, 5, 3, Depth::U8, 0.6);
        for sigma in [0.1, 0.7, 2.0] {
            assert_eq!(blur_with_sigma(&img, sigma).unwrap(), img);
        }
    }

    #[test]
    fn non_positive_sigma_rejected() {
        let img = Image::filled(3, 3, 1, Depth::F32, 0.5);
        let mut rng = RngStream::new(0);
        assert!(gaussian_blur(&img, &mut rng, [0.0, 1.0]).is_err());
        assert!(gaussian_blur(&img, &mut rng, [-1.0, 1.0]).is_err());
        assert!(blur_with_sigma(&img, 0.0).is_err());
    }
}
