//! SimCLR-style base transforms and the probability-gated pipeline that
//! composes them into a view distribution.
//!
//! Every pipeline step owns an RNG slot (`view_stream.derive(step_index)`).
//! The gate draw and the step's parameters come from that slot only, so
//! turning a step off never moves another step's randomness.

mod blur;
mod color;
mod geometry;

use alloc::vec::Vec;
use core::fmt;

pub use blur::{blur_with_sigma, gaussian_blur, gaussian_kernel};
pub use color::{
    adjust_brightness, adjust_contrast, adjust_hue, adjust_saturation, apply_jitter,
    color_jitter, grayscale, sample_jitter, solarize, JitterOp, JitterParams, JitterStrengths,
};
pub use geometry::{
    apply_crop_window, crop_dims, crop_rescale, horizontal_flip, sample_crop_window, CropWindow,
};

use crate::error::{param, Result};
use crate::image::{resize_bilinear, Depth, Image, Pixels};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformKind {
    CropRescale,
    HorizontalFlip,
    ColorJitter,
    Grayscale,
    GaussianBlur,
    Solarize,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::CropRescale,
        TransformKind::HorizontalFlip,
        TransformKind::ColorJitter,
        TransformKind::Grayscale,
        TransformKind::GaussianBlur,
        TransformKind::Solarize,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::CropRescale => "crop_rescale",
            TransformKind::HorizontalFlip => "horizontal_flip",
            TransformKind::ColorJitter => "color_jitter",
            TransformKind::Grayscale => "grayscale",
            TransformKind::GaussianBlur => "gaussian_blur",
            TransformKind::Solarize => "solarize",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    CropRescale {
        area_range: [f64; 2],
        aspect_range: [f64; 2],
    },
    HorizontalFlip,
    ColorJitter(JitterStrengths),
    Grayscale,
    GaussianBlur {
        sigma_range: [f64; 2],
    },
    /// Threshold in unit range; scaled to 127.5 for byte images.
    Solarize {
        threshold: f32,
    },
}

pub const DEFAULT_AREA_RANGE: [f64; 2] = [0.75, 1.0];
pub const DEFAULT_ASPECT_RANGE: [f64; 2] = [3.0 / 4.0, 4.0 / 3.0];
pub const DEFAULT_SIGMA_RANGE: [f64; 2] = [0.1, 2.0];
pub const DEFAULT_SOLARIZE_THRESHOLD: f32 = 0.5;

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::CropRescale { .. } => TransformKind::CropRescale,
            Transform::HorizontalFlip => TransformKind::HorizontalFlip,
            Transform::ColorJitter(_) => TransformKind::ColorJitter,
            Transform::Grayscale => TransformKind::Grayscale,
            Transform::GaussianBlur { .. } => TransformKind::GaussianBlur,
            Transform::Solarize { .. } => TransformKind::Solarize,
        }
    }

    /// Kind with its default parameters.
    pub fn default_for(kind: TransformKind) -> Self {
        match kind {
            TransformKind::CropRescale => Transform::CropRescale {
                area_range: DEFAULT_AREA_RANGE,
                aspect_range: DEFAULT_ASPECT_RANGE,
            },
            TransformKind::HorizontalFlip => Transform::HorizontalFlip,
            TransformKind::ColorJitter => Transform::ColorJitter(JitterStrengths::default()),
            TransformKind::Grayscale => Transform::Grayscale,
            TransformKind::GaussianBlur => Transform::GaussianBlur {
                sigma_range: DEFAULT_SIGMA_RANGE,
            },
            TransformKind::Solarize => Transform::Solarize {
                threshold: DEFAULT_SOLARIZE_THRESHOLD,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Transform::CropRescale {
                area_range,
                aspect_range,
            } => geometry::validate_crop(*area_range, *aspect_range),
            Transform::ColorJitter(s) => s.validate(),
            Transform::GaussianBlur { sigma_range } => blur::validate_sigma_range(*sigma_range),
            Transform::Solarize { threshold } => {
                if (0.0..=1.0).contains(threshold) {
                    Ok(())
                } else {
                    Err(param("solarize threshold must lie in [0, 1]"))
                }
            }
            Transform::HorizontalFlip | Transform::Grayscale => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub transform: Transform,
    pub probability: f64,
}

impl TransformSpec {
    pub fn new(transform: Transform, probability: f64) -> Self {
        Self {
            transform,
            probability,
        }
    }

    pub fn kind(&self) -> TransformKind {
        self.transform.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub steps: Vec<TransformSpec>,
    /// Side of the square output view.
    pub output_size: usize,
}

impl PipelineSpec {
    /// Crop 75-100% area, flip 0.5, jitter 0.8, grayscale 0.2, blur 0.2,
    /// solarize 0.2.
    pub fn simclr(output_size: usize) -> Self {
        let steps = [
            (TransformKind::CropRescale, 1.0),
            (TransformKind::HorizontalFlip, 0.5),
            (TransformKind::ColorJitter, 0.8),
            (TransformKind::Grayscale, 0.2),
            (TransformKind::GaussianBlur, 0.2),
            (TransformKind::Solarize, 0.2),
        ]
        .into_iter()
        .map(|(k, p)| TransformSpec::new(Transform::default_for(k), p))
        .collect();
        Self { steps, output_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_size == 0 {
            return Err(param("output_size must be at least 1"));
        }
        match self.steps.first() {
            Some(s) if s.kind() == TransformKind::CropRescale => {}
            _ => return Err(param("the first pipeline step must be crop_rescale")),
        }
        let crops = self
            .steps
            .iter()
            .filter(|s| s.kind() == TransformKind::CropRescale)
            .count();
        if crops != 1 {
            return Err(param("a pipeline holds exactly one crop_rescale step"));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if !(0.0..=1.0).contains(&step.probability) {
                return Err(param(alloc::format!(
                    "step {i} ({}) probability {} is outside [0, 1]",
                    step.kind(),
                    step.probability
                )));
            }
            step.transform.validate()?;
        }
        Ok(())
    }

    /// Sum of firing probabilities per kind for one application.
    pub fn expected_invocations(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for s in &self.steps {
            out[s.kind().index()] += s.probability;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampledParams {
    Crop(CropWindow),
    Flip,
    Jitter(JitterParams),
    Grayscale,
    Blur { sigma: f64 },
    Solarize { threshold: f32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub kind: TransformKind,
    /// Gate draw `u ~ U[0, 1)`; the step fired iff `u < probability`.
    pub gate: f64,
    pub fired: bool,
    /// Present only when the step fired.
    pub params: Option<SampledParams>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineTrace {
    pub steps: Vec<StepRecord>,
}

impl PipelineTrace {
    pub fn fired_counts(&self) -> [u64; 6] {
        let mut out = [0; 6];
        for s in self.steps.iter().filter(|s| s.fired) {
            out[s.kind.index()] += 1;
        }
        out
    }
}

fn f32_buf(img: &mut Image) -> &mut [f32] {
    if let Pixels::U8(_) = img.pixels {
        *img = img.to_depth(Depth::F32);
    }
    match &mut img.pixels {
        Pixels::F32(v) => v,
        Pixels::U8(_) => unreachable!(),
    }
}

pub fn apply_pipeline(img: &Image, spec: &PipelineSpec, rng: &RngStream) -> Result<Image> {
    apply_pipeline_traced(img, spec, rng).map(|(out, _)| out)
}

/// Runs the pipeline and records each step's gate draw and sampled
/// parameters. Byte inputs are promoted to float only once a filter step
/// fires, and the result is returned in the input's depth.
pub fn apply_pipeline_traced(
    img: &Image,
    spec: &PipelineSpec,
    rng: &RngStream,
) -> Result<(Image, PipelineTrace)> {
    spec.validate()?;
    let input_depth = img.depth();
    let out_size = spec.output_size;
    let mut cur: Option<Image> = None;
    let mut trace = PipelineTrace {
        steps: Vec::with_capacity(spec.steps.len()),
    };

    for (slot, step) in spec.steps.iter().enumerate() {
        let mut s = rng.derive(slot as u64);
        let gate = s.uniform();
        let fired = gate < step.probability;
        let mut record = StepRecord {
            kind: step.kind(),
            gate,
            fired,
            params: None,
        };
        if let Transform::CropRescale {
            area_range,
            aspect_range,
        } = &step.transform
        {
            cur = Some(if fired {
                let w = sample_crop_window(img.width(), img.height(), *area_range, *aspect_range, &mut s)?;
                record.params = Some(SampledParams::Crop(w));
                apply_crop_window(img, &w, out_size)?
            } else {
                resize_bilinear(img, out_size, out_size)?
            });
            trace.steps.push(record);
            continue;
        }
        let work = cur.as_mut().expect("validated: crop_rescale runs first");
        if fired {
            let (w, h, c) = work.shape();
            let params = match &step.transform {
                Transform::CropRescale { .. } => unreachable!(),
                Transform::HorizontalFlip => {
                    *work = horizontal_flip(work);
                    SampledParams::Flip
                }
                Transform::ColorJitter(strengths) => {
                    let p = sample_jitter(&mut s, strengths)?;
                    color::jitter_in_place(f32_buf(work), c, &p);
                    SampledParams::Jitter(p)
                }
                Transform::Grayscale => {
                    color::grayscale_in_place(f32_buf(work), c);
                    SampledParams::Grayscale
                }
                Transform::GaussianBlur { sigma_range } => {
                    let sigma = s.uniform_range(sigma_range[0], sigma_range[1]);
                    blur::blur_in_place(f32_buf(work), w, h, c, sigma);
                    SampledParams::Blur { sigma }
                }
                Transform::Solarize { threshold } => {
                    let native = threshold * work.depth().max_value();
                    *work = solarize(work, native);
                    SampledParams::Solarize {
                        threshold: *threshold,
                    }
                }
            };
            record.params = Some(params);
        }
        trace.steps.push(record);
    }
    let out = cur.expect("validated: crop_rescale runs first");
    let out = if out.depth() == input_depth {
        out
    } else {
        out.to_depth(input_depth)
    };
    Ok((out, trace))
}
