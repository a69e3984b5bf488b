//! CIFAR-10 binary batches: 3073-byte records of one label byte followed
//! by 1024 red, 1024 green and 1024 blue bytes (32x32, row-major planes).
//! Images are converted to interleaved RGB on the way in.

use std::path::Path;

use viewmix_core::{Dataset, DatasetSource, Image, LabeledImage};

use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const PLANE: usize = SIDE * SIDE;
pub const RECORD_LEN: usize = 1 + 3 * PLANE;
pub const NUM_CLASSES: u8 = 10;

pub fn decode_record(record: &[u8]) -> std::result::Result<LabeledImage, String> {
    if record.len() != RECORD_LEN {
        return Err(format!("record is {} bytes, expected {RECORD_LEN}", record.len()));
    }
    let label = record[0];
    if label >= NUM_CLASSES {
        return Err(format!("label byte {label} is not a CIFAR-10 class"));
    }
    let (r, rest) = record[1..].split_at(PLANE);
    let (g, b) = rest.split_at(PLANE);
    let mut data = Vec::with_capacity(3 * PLANE);
    for i in 0..PLANE {
        data.extend_from_slice(&[r[i], g[i], b[i]]);
    }
    let image = Image::from_u8(SIDE, SIDE, 3, data).map_err(|e| e.to_string())?;
    Ok(LabeledImage { image, label })
}

/// Decodes a whole batch buffer; `path` is only used in error messages.
pub fn decode_cifar10(bytes: &[u8], path: &Path) -> Result<Dataset> {
    if bytes.is_empty() {
        return Err(Error::format(path, "empty file"));
    }
    if bytes.len() % RECORD_LEN != 0 {
        let offset = bytes.len() - bytes.len() % RECORD_LEN;
        return Err(Error::format(
            path,
            format!(
                "truncated record at byte offset {offset}: file is {} bytes, not a multiple of {RECORD_LEN}",
                bytes.len()
            ),
        ));
    }
    let items = bytes
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            decode_record(rec)
                .map_err(|m| Error::format(path, format!("record {i} at byte offset {}: {m}", i * RECORD_LEN)))
        })
        .collect::<Result<Vec<_>>>()?;
    let source = DatasetSource {
        path: path.display().to_string(),
        format: "cifar10".into(),
    };
    Ok(Dataset::new(items, source)?)
}

pub fn load_cifar10(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cifar10(&bytes, path)
}

/// Re-encodes 32x32 RGB byte images into the planar record layout.
pub fn encode_cifar10(items: &[LabeledImage]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(items.len() * RECORD_LEN);
    for (i, item) in items.iter().enumerate() {
        let data = item
            .image
            .as_u8()
            .filter(|_| item.image.shape() == (SIDE, SIDE, 3))
            .ok_or_else(|| Error::Other(format!("item {i} is not a 32x32x3 byte image")))?;
        if item.label >= NUM_CLASSES {
            return Err(Error::Other(format!("item {i} has label {}", item.label)));
        }
        out.push(item.label);
        for c in 0..3 {
            out.extend(data.chunks_exact(3).map(|px| px[c]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, r: u8, g: u8, b: u8) -> Vec<u8> {
        let mut rec = vec![label];
        rec.extend(std::iter::repeat(r).take(PLANE));
        rec.extend(std::iter::repeat(g).take(PLANE));
        rec.extend(std::iter::repeat(b).take(PLANE));
        rec
    }

    #[test]
    fn ten_records() {
        let bytes: Vec<u8> = (0..10).flat_map(|i| record(i, i, 0, 0)).collect();
        assert_eq!(bytes.len(), 30730);
        let ds = decode_cifar10(&bytes, Path::new("x")).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.shape(), (32, 32, 3));
        assert_eq!(ds.items()[7].label, 7);
    }

    #[test]
    fn planes_become_interleaved() {
        let ds = decode_cifar10(&record(3, 255, 0, 0), Path::new("x")).unwrap();
        assert_eq!(&ds.items()[0].image.as_u8().unwrap()[..3], &[255, 0, 0]);
    }

    #[test]
    fn truncation_names_offset() {
        let mut bytes = record(1, 1, 2, 3);
        bytes.extend_from_slice(&[0; 100]);
        let msg = decode_cifar10(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(msg.contains("offset 3073"), "{msg}");
    }

    #[test]
    fn bad_label_rejected() {
        let msg = decode_cifar10(&record(10, 0, 0, 0), Path::new("x")).unwrap_err().to_string();
        assert!(msg.contains("label byte 10"), "{msg}");
    }

    #[test]
    fn encode_inverts_decode() {
        let mut bytes = Vec::new();
        for i in 0..4u8 {
            let mut rec = vec![i];
            rec.extend((0..3 * PLANE).map(|k| (k as u8).wrapping_mul(i + 3)));
            bytes.extend(rec);
        }
        let ds = decode_cifar10(&bytes, Path::new("x")).unwrap();
        assert_eq!(encode_cifar10(ds.items()).unwrap(), bytes);
    }
}
