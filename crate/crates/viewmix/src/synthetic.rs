//! Deterministic stand-in images for benchmarks when no real dataset is
//! available: smooth color gradients, a few soft blobs and mild noise.

use viewmix_core::{Dataset, DatasetSource, Image, LabeledImage, RngStream};

use crate::error::Result;

pub fn synthetic_image(side: usize, rng: &mut RngStream) -> Image {
    let base: [f64; 3] = [rng.uniform(), rng.uniform(), rng.uniform()];
    let grad: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.uniform_range(-0.5, 0.5), rng.uniform_range(-0.5, 0.5)]);
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            (
                rng.uniform(),
                rng.uniform(),
                rng.uniform_range(0.05, 0.3),
                [rng.uniform_range(-0.6, 0.6), rng.uniform_range(-0.6, 0.6), rng.uniform_range(-0.6, 0.6)],
            )
        })
        .collect();
    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let (u, v) = (x as f64 / side as f64, y as f64 / side as f64);
            for c in 0..3 {
                let mut s = base[c] + grad[c][0] * (u - 0.5) + grad[c][1] * (v - 0.5);
                for (bx, by, r, col) in &blobs {
                    let d2 = (u - bx).powi(2) + (v - by).powi(2);
                    s += col[c] * (-d2 / (2.0 * r * r)).exp();
                }
                s += rng.uniform_range(-0.03, 0.03);
                data.push((s.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Image::from_u8(side, side, 3, data).expect("sized buffer")
}

pub fn synthetic_dataset(count: usize, side: usize, seed: u64) -> Result<Dataset> {
    let root = RngStream::new(seed);
    let items = (0..count)
        .map(|i| {
            let mut rng = root.derive(i as u64);
            let label = rng.below(10) as u8;
            LabeledImage {
                image: synthetic_image(side, &mut rng),
                label,
            }
        })
        .collect();
    let source = DatasetSource {
        path: format!("synthetic:{count}x{side}:{seed}"),
        format: "synthetic".into(),
    };
    Ok(Dataset::new(items, source)?)
}

/// A CIFAR-10 binary batch (`records` x 3073 bytes) of synthetic images.
pub fn synthetic_cifar_batch(records: usize, seed: u64) -> Result<Vec<u8>> {
    let ds = synthetic_dataset(records, crate::cifar::SIDE, seed)?;
    crate::cifar::encode_cifar10(ds.items())
}
