//! Preview grid: one row per source image, columns original, view A,
//! view B and the strategy result for view A. Baseline has no result
//! column.

use std::path::Path;

use image::{ImageEncoder, RgbImage};
use viewmix_core::image::resize_bilinear;
use viewmix_core::multiview::generate_batch_on;
use viewmix_core::{Dataset, Depth, GateScope, Image, MultiViewConfig, Sequential, Strategy};

use crate::error::{Error, Result};

const PAD: usize = 2;
const BACKGROUND: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone)]
pub struct PreviewGrid {
    pub rows: usize,
    pub columns: usize,
    pub cell: usize,
    pub image: RgbImage,
}

fn rgb_bytes(img: &Image) -> Vec<u8> {
    let bytes = img.to_depth(Depth::U8);
    let data = bytes.as_u8().expect("converted to bytes");
    match img.channels() {
        1 => data.iter().flat_map(|&v| [v, v, v]).collect(),
        _ => data.to_vec(),
    }
}

fn blit(canvas: &mut RgbImage, img: &Image, x0: usize, y0: usize, scale: usize) {
    let rgb = rgb_bytes(img);
    let w = img.width();
    for y in 0..img.height() * scale {
        for x in 0..w * scale {
            let i = ((y / scale) * w + x / scale) * 3;
            canvas.put_pixel((x0 + x) as u32, (y0 + y) as u32, image::Rgb([rgb[i], rgb[i + 1], rgb[i + 2]]));
        }
    }
}

/// Builds the grid for the first `images` dataset items. The strategy is
/// forced to fire so the result column always shows it.
pub fn render_preview(
    dataset: &Dataset,
    cfg: &MultiViewConfig,
    seed: u64,
    images: usize,
    scale: usize,
) -> Result<PreviewGrid> {
    if images == 0 || scale == 0 {
        return Err(Error::Config("preview images and scale must be at least 1".into()));
    }
    if cfg.num_views < 2 {
        return Err(Error::Config("preview needs at least two views".into()));
    }
    let rows = images.min(dataset.len());
    let mut mv = cfg.clone();
    mv.strategy_probability = 1.0;
    mv.gate_scope = GateScope::PerView;
    mv.retain_base_views = true;
    let indices: Vec<usize> = (0..rows).collect();
    let batches = generate_batch_on(&Sequential, dataset, &indices, &mv, seed, 0)?;

    let cell = cfg.output_size();
    let columns = if cfg.strategy == Strategy::Baseline { 3 } else { 4 };
    let side = cell * scale;
    let width = columns * side + (columns + 1) * PAD;
    let height = rows * side + (rows + 1) * PAD;
    let mut canvas = RgbImage::from_pixel(width as u32, height as u32, image::Rgb(BACKGROUND));
    for (r, b) in batches.iter().enumerate() {
        let original = dataset.image(b.source_index)?;
        let original = if original.width() == cell && original.height() == cell {
            original.clone()
        } else {
            resize_bilinear(original, cell, cell)?
        };
        let base = b.base_views.as_ref().expect("base views retained");
        let mut cells = vec![&original, &base[0], &base[1]];
        if columns == 4 {
            cells.push(&b.views[0]);
        }
        let y0 = PAD + r * (side + PAD);
        for (c, img) in cells.into_iter().enumerate() {
            blit(&mut canvas, img, PAD + c * (side + PAD), y0, scale);
        }
    }
    Ok(PreviewGrid {
        rows,
        columns,
        cell: side,
        image: canvas,
    })
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Other(format!("png encode: {e}")))?;
    Ok(out)
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
