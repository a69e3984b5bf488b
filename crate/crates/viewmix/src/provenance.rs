//! JSON-lines provenance: one record per emitted view.

use std::io::Write;

use serde_json::{json, Value};
use viewmix_core::transforms::{JitterOp, SampledParams, StepRecord};
use viewmix_core::{BBox, ViewBatch, ViewProvenance};

use crate::error::{Error, Result};

fn op_name(op: JitterOp) -> &'static str {
    match op {
        JitterOp::Brightness => "brightness",
        JitterOp::Contrast => "contrast",
        JitterOp::Saturation => "saturation",
        JitterOp::Hue => "hue",
    }
}

fn params_json(p: &SampledParams) -> Value {
    match p {
        SampledParams::Crop(w) => json!({
            "left": w.left, "top": w.top, "width": w.width, "height": w.height,
            "area": w.area, "aspect": w.aspect,
        }),
        SampledParams::Flip | SampledParams::Grayscale => json!({}),
        SampledParams::Jitter(j) => json!({
            "order": j.order.iter().map(|o| op_name(*o)).collect::<Vec<_>>(),
            "brightness": j.brightness, "contrast": j.contrast,
            "saturation": j.saturation, "hue": j.hue,
        }),
        SampledParams::Blur { sigma } => json!({ "sigma": sigma }),
        SampledParams::Solarize { threshold } => json!({ "threshold": threshold }),
    }
}

fn step_json(s: &StepRecord) -> Value {
    json!({
        "kind": s.kind.name(),
        "gate": s.gate,
        "fired": s.fired,
        "params": s.params.as_ref().map(params_json),
    })
}

pub fn bbox_json(b: &BBox) -> Value {
    json!({
        "lambda": b.lambda,
        "center_x": b.center_x,
        "center_y": b.center_y,
        "nominal_w": b.nominal_w,
        "nominal_h": b.nominal_h,
        "left": b.clipped.left,
        "top": b.clipped.top,
        "right": b.clipped.right,
        "bottom": b.clipped.bottom,
        "area_fraction": b.area_fraction(),
    })
}

pub fn view_record(step: u64, batch: &ViewBatch, p: &ViewProvenance) -> Value {
    json!({
        "step": step,
        "source_index": batch.source_index,
        "view": p.view,
        "strategy": batch.strategy.name(),
        "applied": p.applied,
        "bbox": p.bbox.as_ref().map(bbox_json),
        "donor_view": p.donor_view,
        "donor_image": p.donor_image,
        "transforms": p.trace.steps.iter().map(step_json).collect::<Vec<_>>(),
    })
}

pub fn write_provenance<W: Write>(step: u64, batches: &[ViewBatch], out: &mut W) -> std::io::Result<()> {
    for b in batches {
        for p in &b.provenance {
            serde_json::to_writer(&mut *out, &view_record(step, b, p))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn export_provenance(step: u64, batches: &[ViewBatch], path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_provenance(step, batches, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
