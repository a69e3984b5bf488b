use std::path::{Path, PathBuf};

use viewmix_core::image::resize_bilinear;
use viewmix_core::{Dataset, DatasetSource, Image, LabeledImage};

use crate::error::{Error, Result};

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn decode_image_file(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::from_u8(w as usize, h as usize, 3, rgb.into_raw())?)
}

/// Decodes every PNG/JPEG in `dir` (sorted by file name) to 3-channel bytes.
/// With `resize = Some((w, h))` every image is bilinearly resized; without
/// it all files must already share one size. Labels are 0.
pub fn load_image_folder(dir: impl AsRef<Path>, resize: Option<(usize, usize)>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let files = image_files(dir)?;
    if files.is_empty() {
        return Err(Error::format(dir, "no PNG or JPEG files"));
    }
    let mut items = Vec::with_capacity(files.len());
    let mut first_shape: Option<(usize, usize, PathBuf)> = None;
    for file in &files {
        let mut image = decode_image_file(file)?;
        if let Some((w, h)) = resize {
            image = resize_bilinear(&image, w, h)?;
        } else {
            match &first_shape {
                None => first_shape = Some((image.width(), image.height(), file.clone())),
                Some((w, h, first)) if (*w, *h) != (image.width(), image.height()) => {
                    return Err(Error::format(
                        file,
                        format!(
                            "is {}x{} but {} is {w}x{h}; pass a resize target",
                            image.width(),
                            image.height(),
                            first.display()
                        ),
                    ));
                }
                Some(_) => {}
            }
        }
        items.push(LabeledImage { image, label: 0 });
    }
    let source = DatasetSource {
        path: dir.display().to_string(),
        format: "folder".into(),
    };
    Ok(Dataset::new(items, source)?)
}
