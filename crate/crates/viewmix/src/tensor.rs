//! Tensor container.
//!
//! ```text
//! VMIXTENS1\n
//! dtype=<u8|f32> shape=<d0,d1,...>\n
//! <payload: little-endian, C order>
//! ```
//!
//! View batches are written with shape `(images, views, height, width,
//! channels)` (or `(images, views, channels, height, width)` for the planar
//! layout).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use viewmix_core::{Depth, Image, Pixels, ViewBatch};

use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"VMIXTENS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    F32,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::F32 => "f32",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
        }
    }

    fn of(depth: Depth) -> Self {
        match depth {
            Depth::U8 => DType::U8,
            Depth::F32 => DType::F32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportLayout {
    /// `(N, V, H, W, C)`, interleaved channels.
    #[default]
    Nvhwc,
    /// `(N, V, C, H, W)`, planar channels.
    Nvchw,
}

impl ExportLayout {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nvhwc" => Some(Self::Nvhwc),
            "nvchw" => Some(Self::Nvchw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

pub fn header(dtype: DType, shape: &[usize]) -> Vec<u8> {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    let mut out = MAGIC.to_vec();
    out.push(b'\n');
    out.extend_from_slice(format!("dtype={} shape={}\n", dtype.name(), dims.join(",")).as_bytes());
    out
}

/// Dtype and shape of the export, checking every view against the first.
pub fn batch_shape(batches: &[ViewBatch], layout: ExportLayout) -> Result<(DType, Vec<usize>)> {
    let first = batches
        .first()
        .and_then(|b| b.views.first())
        .ok_or_else(|| Error::Other("nothing to export: empty batch list".into()))?;
    let views = batches[0].views.len();
    let (w, h, c) = first.shape();
    let depth = first.depth();
    for (i, b) in batches.iter().enumerate() {
        if b.views.len() != views {
            return Err(Error::Other(format!(
                "batch {i} has {} views, expected {views}",
                b.views.len()
            )));
        }
        for (v, img) in b.views.iter().enumerate() {
            if img.shape() != (w, h, c) || img.depth() != depth {
                let (iw, ih, ic) = img.shape();
                return Err(Error::Other(format!(
                    "batch {i} view {v} is {iw}x{ih}x{ic}, expected {w}x{h}x{c}"
                )));
            }
        }
    }
    let shape = match layout {
        ExportLayout::Nvhwc => vec![batches.len(), views, h, w, c],
        ExportLayout::Nvchw => vec![batches.len(), views, c, h, w],
    };
    Ok((DType::of(depth), shape))
}

fn write_image<W: Write>(out: &mut W, img: &Image, layout: ExportLayout) -> std::io::Result<()> {
    let c = img.channels();
    match (img.pixels(), layout) {
        (Pixels::U8(v), ExportLayout::Nvhwc) => out.write_all(v),
        (Pixels::F32(v), ExportLayout::Nvhwc) => v.iter().try_for_each(|s| out.write_all(&s.to_le_bytes())),
        (Pixels::U8(v), ExportLayout::Nvchw) => {
            (0..c).try_for_each(|ch| {
                let plane: Vec<u8> = v.iter().skip(ch).step_by(c).copied().collect();
                out.write_all(&plane)
            })
        }
        (Pixels::F32(v), ExportLayout::Nvchw) => (0..c).try_for_each(|ch| {
            v.iter()
                .skip(ch)
                .step_by(c)
                .try_for_each(|s| out.write_all(&s.to_le_bytes()))
        }),
    }
}

/// Validates shapes first, then streams header and payload.
pub fn write_batch<W: Write>(batches: &[ViewBatch], layout: ExportLayout, out: &mut W) -> Result<()> {
    let (dtype, shape) = batch_shape(batches, layout)?;
    let io = |e| Error::Other(format!("write failed: {e}"));
    out.write_all(&header(dtype, &shape)).map_err(io)?;
    write_payload(batches, layout, out).map_err(io)
}

/// Payload bytes only, for writers that stream several chunks under one
/// header.
pub fn write_payload<W: Write>(batches: &[ViewBatch], layout: ExportLayout, out: &mut W) -> std::io::Result<()> {
    for b in batches {
        for v in &b.views {
            write_image(out, v, layout)?;
        }
    }
    Ok(())
}

pub fn export_batch(batches: &[ViewBatch], path: impl AsRef<Path>, layout: ExportLayout) -> Result<()> {
    let path = path.as_ref();
    batch_shape(batches, layout)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_batch(batches, layout, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a raw tensor (used by `ingest` for `(N, H, W, C)` dumps).
pub fn write_tensor(path: impl AsRef<Path>, shape: &[usize], data: &TensorData) -> Result<()> {
    let path = path.as_ref();
    let (dtype, len) = match data {
        TensorData::U8(v) => (DType::U8, v.len()),
        TensorData::F32(v) => (DType::F32, v.len()),
    };
    if shape.iter().product::<usize>() != len {
        return Err(Error::Other(format!("shape {shape:?} does not hold {len} elements")));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&header(dtype, shape)).map_err(io)?;
    match data {
        TensorData::U8(v) => w.write_all(v).map_err(io)?,
        TensorData::F32(v) => v.iter().try_for_each(|s| w.write_all(&s.to_le_bytes())).map_err(io)?,
    }
    w.flush().map_err(io)
}

pub fn parse_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let rest = bytes
        .strip_prefix(MAGIC)
        .and_then(|r| r.strip_prefix(b"\n"))
        .ok_or_else(|| bad("missing VMIXTENS1 magic line"))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("unterminated header line"))?;
    let line = std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not UTF-8"))?;
    let payload = &rest[nl + 1..];
    let mut dtype = None;
    let mut shape = None;
    for field in line.split(' ') {
        match field.split_once('=') {
            Some(("dtype", "u8")) => dtype = Some(DType::U8),
            Some(("dtype", "f32")) => dtype = Some(DType::F32),
            Some(("shape", dims)) => {
                shape = Some(
                    dims.split(',')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad shape"))?,
                )
            }
            _ => return Err(bad(&format!("unknown header field {field:?}"))),
        }
    }
    let dtype = dtype.ok_or_else(|| bad("missing dtype"))?;
    let shape: Vec<usize> = shape.ok_or_else(|| bad("missing shape"))?;
    let expected = shape.iter().product::<usize>() * dtype.size();
    if payload.len() != expected {
        return Err(bad(&format!(
            "payload is {} bytes, header promises {expected}",
            payload.len()
        )));
    }
    let data = match dtype {
        DType::U8 => TensorData::U8(payload.to_vec()),
        DType::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
    };
    Ok(Tensor { dtype, shape, data })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_tensor(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use viewmix_core::{generate_views, MultiViewConfig, PipelineSpec, RngStream, Strategy};

    fn batches(n: usize, side: usize) -> Vec<ViewBatch> {
        let cfg = MultiViewConfig::new(Strategy::ViewMix, PipelineSpec::simclr(side));
        let img = Image::filled(side, side, 3, Depth::U8, 0.25);
        (0..n)
            .map(|i| generate_views(&img, &cfg, &RngStream::new(i as u64)).unwrap())
            .collect()
    }

    #[test]
    fn header_is_bit_exact() {
        assert_eq!(header(DType::U8, &[2, 2, 32, 32, 3]), b"VMIXTENS1\ndtype=u8 shape=2,2,32,32,3\n".to_vec());
    }

    #[test]
    fn two_by_two_payload() {
        let mut buf = Vec::new();
        write_batch(&batches(2, 32), ExportLayout::Nvhwc, &mut buf).unwrap();
        let t = parse_tensor(&buf, Path::new("mem")).unwrap();
        assert_eq!(t.shape, vec![2, 2, 32, 32, 3]);
        assert_eq!(buf.len() - header(DType::U8, &t.shape).len(), 12288);
    }

    #[test]
    fn empty_list_rejected() {
        let mut buf = Vec::new();
        assert!(write_batch(&[], ExportLayout::Nvhwc, &mut buf).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn mismatched_view_rejected_before_writing() {
        let mut b = batches(2, 8);
        b[1].views[0] = Image::filled(9, 8, 3, Depth::U8, 0.0);
        let mut buf = Vec::new();
        assert!(write_batch(&b, ExportLayout::Nvhwc, &mut buf).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn planar_layout_reorders_channels() {
        let img = Image::from_u8(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let mut b = batches(1, 2);
        b[0].views = vec![img];
        let mut buf = Vec::new();
        write_batch(&b, ExportLayout::Nvchw, &mut buf).unwrap();
        let t = parse_tensor(&buf, Path::new("mem")).unwrap();
        assert_eq!(t.shape, vec![1, 1, 3, 1, 2]);
        assert_eq!(t.data, TensorData::U8(vec![1, 4, 2, 5, 3, 6]));
    }

    #[test]
    fn f32_round_trip() {
        let mut b = batches(1, 4);
        b[0].views = vec![Image::filled(4, 4, 1, Depth::F32, 0.3)];
        let mut buf = Vec::new();
        write_batch(&b, ExportLayout::Nvhwc, &mut buf).unwrap();
        let t = parse_tensor(&buf, Path::new("mem")).unwrap();
        assert_eq!(t.dtype, DType::F32);
        assert_eq!(t.data, TensorData::F32(vec![0.3; 16]));
    }

    #[test]
    fn corrupt_containers_rejected() {
        let p = Path::new("mem");
        assert!(parse_tensor(b"NOPE\n", p).is_err());
        assert!(parse_tensor(b"VMIXTENS1\ndtype=u8 shape=2\n\x01", p).is_err());
        assert!(parse_tensor(b"VMIXTENS1\ndtype=u16 shape=1\n\x01", p).is_err());
        assert!(parse_tensor(b"VMIXTENS1\ndtype=u8 shape=1\n\x01", p).is_ok());
    }
}
