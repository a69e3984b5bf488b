//! n-view generation for joint-embedding training.
//!
//! Base views come from the transform pipeline with one RNG stream per
//! view. Regional strategies then work on those finished base views:
//! ViewMix takes its donor patch from a sibling view of the same image,
//! CutMix from a base view of another image in the batch, Cutout from a
//! constant. No strategy runs any extra base transform, which
//! [`count_invocations`] and [`InvocationCounts`] make checkable.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{param, Error, Result};
use crate::image::{Dataset, Image};
use crate::regional::{
    cutmix, cutout, sample_bbox, validate_ratio_range, viewmix, BBox, LambdaMode,
};
use crate::rng::RngStream;
use crate::transforms::{apply_pipeline_traced, PipelineSpec, PipelineTrace};

const TAG_VIEWS: u64 = 0x5649_4557; // "VIEW"
const TAG_STRATEGY: u64 = 0x5354_5241; // "STRA"
const TAG_PAIR_GATE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    ViewMix,
    Cutout,
    CutMix,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Baseline,
        Strategy::ViewMix,
        Strategy::Cutout,
        Strategy::CutMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::ViewMix => "viewmix",
            Strategy::Cutout => "cutout",
            Strategy::CutMix => "cutmix",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Granularity of the strategy gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateScope {
    /// Each view draws its own gate and, when it fires, a uniform donor.
    #[default]
    PerView,
    /// One gate per source image; when it fires every view is mixed.
    PerPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewConfig {
    pub num_views: usize,
    pub base_pipeline: PipelineSpec,
    /// Optional per-view pipelines (asymmetric branches). Empty means every
    /// view uses `base_pipeline`; otherwise exactly `num_views` entries.
    pub view_pipelines: Vec<PipelineSpec>,
    pub strategy: Strategy,
    pub strategy_probability: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub lambda_mode: LambdaMode,
    pub gate_scope: GateScope,
    /// Cutout fill, unit range.
    pub fill: f32,
    /// Keep pristine base views in [`ViewBatch::base_views`].
    pub retain_base_views: bool,
}

pub const DEFAULT_STRATEGY_PROBABILITY: f64 = 0.33;
pub const DEFAULT_R_MIN: f64 = 0.3;
pub const DEFAULT_R_MAX: f64 = 0.6;

impl MultiViewConfig {
    pub fn new(strategy: Strategy, base_pipeline: PipelineSpec) -> Self {
        Self {
            num_views: 2,
            base_pipeline,
            view_pipelines: Vec::new(),
            strategy,
            strategy_probability: DEFAULT_STRATEGY_PROBABILITY,
            r_min: DEFAULT_R_MIN,
            r_max: DEFAULT_R_MAX,
            lambda_mode: LambdaMode::Linear,
            gate_scope: GateScope::PerView,
            fill: 0.0,
            retain_base_views: false,
        }
    }

    pub fn pipeline_for(&self, view: usize) -> &PipelineSpec {
        self.view_pipelines.get(view).unwrap_or(&self.base_pipeline)
    }

    pub fn output_size(&self) -> usize {
        self.base_pipeline.output_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_views == 0 {
            return Err(param("num_views must be at least 1"));
        }
        if self.strategy == Strategy::ViewMix && self.num_views < 2 {
            return Err(param("viewmix needs num_views >= 2 so a donor view exists"));
        }
        if !(0.0..=1.0).contains(&self.strategy_probability) {
            return Err(param("strategy_probability must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(param("fill must lie in [0, 1]"));
        }
        validate_ratio_range(self.r_min, self.r_max)?;
        self.base_pipeline.validate()?;
        if !self.view_pipelines.is_empty() {
            if self.view_pipelines.len() != self.num_views {
                return Err(param(alloc::format!(
                    "{} view pipelines given for {} views",
                    self.view_pipelines.len(),
                    self.num_views
                )));
            }
            for p in &self.view_pipelines {
                p.validate()?;
                if p.output_size != self.base_pipeline.output_size {
                    return Err(param("all view pipelines must share output_size"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewProvenance {
    pub view: usize,
    pub applied: bool,
    /// Present iff `applied`.
    pub bbox: Option<BBox>,
    /// ViewMix: sibling view the patch came from.
    pub donor_view: Option<usize>,
    /// CutMix: dataset index of the donor image (its view is `donor_view`).
    pub donor_image: Option<usize>,
    /// Base pipeline gates and parameters for this view.
    pub trace: PipelineTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewBatch {
    pub source_index: usize,
    pub strategy: Strategy,
    pub views: Vec<Image>,
    pub provenance: Vec<ViewProvenance>,
    pub base_views: Option<Vec<Image>>,
}

impl ViewBatch {
    pub fn invocation_counts(&self) -> InvocationCounts {
        let mut c = InvocationCounts::default();
        for p in &self.provenance {
            for (acc, n) in c.base.iter_mut().zip(p.trace.fired_counts()) {
                *acc += n;
            }
            c.regional += p.applied as u64;
        }
        c
    }
}

/// Observed executions per base transform kind (indexed by
/// [`TransformKind::index`](crate::TransformKind::index)) plus regional ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InvocationCounts {
    pub base: [u64; 6],
    pub regional: u64,
}

impl InvocationCounts {
    pub fn from_batches(batches: &[ViewBatch]) -> Self {
        let mut total = Self::default();
        for b in batches {
            total.add(&b.invocation_counts());
        }
        total
    }

    pub fn add(&mut self, other: &Self) {
        for (a, b) in self.base.iter_mut().zip(other.base) {
            *a += b;
        }
        self.regional += other.regional;
    }
}

/// Expected executions per source image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpectedCounts {
    pub base: [f64; 6],
    pub regional: f64,
}

/// Expected per-image invocation counts. The base part depends only on the
/// view pipelines, never on the strategy.
pub fn count_invocations(cfg: &MultiViewConfig) -> ExpectedCounts {
    let mut base = [0.0; 6];
    for v in 0..cfg.num_views {
        for (acc, e) in base.iter_mut().zip(cfg.pipeline_for(v).expected_invocations()) {
            *acc += e;
        }
    }
    let regional = match cfg.strategy {
        Strategy::Baseline => 0.0,
        _ => cfg.num_views as f64 * cfg.strategy_probability,
    };
    ExpectedCounts { base, regional }
}

/// Stream for one source image at one training step.
pub fn image_stream(seed: u64, step: u64, index: usize) -> RngStream {
    RngStream::new(seed).derive(step).derive(index as u64)
}

/// Stream owned by view `view` of an image.
pub fn view_stream(image: &RngStream, view: usize) -> RngStream {
    image.derive(TAG_VIEWS).derive(view as u64)
}

fn base_views(img: &Image, cfg: &MultiViewConfig, rng: &RngStream) -> Result<(Vec<Image>, Vec<PipelineTrace>)> {
    let mut views = Vec::with_capacity(cfg.num_views);
    let mut traces = Vec::with_capacity(cfg.num_views);
    for v in 0..cfg.num_views {
        let (out, trace) = apply_pipeline_traced(img, cfg.pipeline_for(v), &view_stream(rng, v))?;
        views.push(out);
        traces.push(trace);
    }
    Ok((views, traces))
}

/// Base views of other images in the batch, for CutMix.
struct DonorPool<'a> {
    views: &'a [Vec<Image>],
    indices: &'a [usize],
    position: usize,
}

struct Mixed {
    image: Image,
    bbox: BBox,
    donor_view: Option<usize>,
    donor_image: Option<usize>,
}

fn mix_views(
    base: &[Image],
    cfg: &MultiViewConfig,
    rng: &RngStream,
    pool: Option<&DonorPool<'_>>,
) -> Result<Vec<Option<Mixed>>> {
    let n = base.len();
    let strat = rng.derive(TAG_STRATEGY);
    let p = cfg.strategy_probability;
    let pair_fired = cfg.gate_scope == GateScope::PerPair && strat.derive(TAG_PAIR_GATE).uniform() < p;
    let mut out = Vec::with_capacity(n);
    for (i, view) in base.iter().enumerate() {
        if cfg.strategy == Strategy::Baseline {
            out.push(None);
            continue;
        }
        let mut s = strat.derive(i as u64);
        let fired = match cfg.gate_scope {
            GateScope::PerView => s.uniform() < p,
            GateScope::PerPair => pair_fired,
        };
        if !fired {
            out.push(None);
            continue;
        }
        let (w, h) = (view.width(), view.height());
        let mixed = match cfg.strategy {
            Strategy::Baseline => unreachable!(),
            Strategy::ViewMix => {
                let mut j = s.below(n as u64 - 1) as usize;
                if j >= i {
                    j += 1;
                }
                let bbox = sample_bbox(w, h, cfg.r_min, cfg.r_max, cfg.lambda_mode, &mut s)?;
                Mixed {
                    image: viewmix(view, &base[j], &bbox.mask())?,
                    bbox,
                    donor_view: Some(j),
                    donor_image: None,
                }
            }
            Strategy::Cutout => {
                let bbox = sample_bbox(w, h, cfg.r_min, cfg.r_max, cfg.lambda_mode, &mut s)?;
                Mixed {
                    image: cutout(view, &bbox, cfg.fill)?,
                    bbox,
                    donor_view: None,
                    donor_image: None,
                }
            }
            Strategy::CutMix => {
                let pool = pool.ok_or(Error::CutMixNeedsBatch)?;
                let others = pool.views.len() as u64 - 1;
                let mut q = s.below(others) as usize;
                if q >= pool.position {
                    q += 1;
                }
                let donor_views = &pool.views[q];
                let dv = s.below(donor_views.len() as u64) as usize;
                let bbox = sample_bbox(w, h, cfg.r_min, cfg.r_max, cfg.lambda_mode, &mut s)?;
                Mixed {
                    image: cutmix(view, &donor_views[dv], &bbox)?.image,
                    bbox,
                    donor_view: Some(dv),
                    donor_image: Some(pool.indices[q]),
                }
            }
        };
        out.push(Some(mixed));
    }
    Ok(out)
}

fn assemble(
    source_index: usize,
    cfg: &MultiViewConfig,
    base: Vec<Image>,
    traces: Vec<PipelineTrace>,
    mixed: Vec<Option<Mixed>>,
) -> ViewBatch {
    let retained = cfg.retain_base_views.then(|| base.clone());
    let mut views = Vec::with_capacity(base.len());
    let mut provenance = Vec::with_capacity(base.len());
    for (view, ((b, trace), m)) in base.into_iter().zip(traces).zip(mixed).enumerate() {
        match m {
            Some(m) => {
                views.push(m.image);
                provenance.push(ViewProvenance {
                    view,
                    applied: true,
                    bbox: Some(m.bbox),
                    donor_view: m.donor_view,
                    donor_image: m.donor_image,
                    trace,
                });
            }
            None => {
                views.push(b);
                provenance.push(ViewProvenance {
                    view,
                    applied: false,
                    bbox: None,
                    donor_view: None,
                    donor_image: None,
                    trace,
                });
            }
        }
    }
    ViewBatch {
        source_index,
        strategy: cfg.strategy,
        views,
        provenance,
        base_views: retained,
    }
}

/// Views for a single image. CutMix is rejected here because its donor
/// must come from another image; use [`generate_batch`].
pub fn generate_views(img: &Image, cfg: &MultiViewConfig, rng: &RngStream) -> Result<ViewBatch> {
    cfg.validate()?;
    if cfg.strategy == Strategy::CutMix {
        return Err(Error::CutMixNeedsBatch);
    }
    let (base, traces) = base_views(img, cfg, rng)?;
    let mixed = mix_views(&base, cfg, rng, None)?;
    Ok(assemble(0, cfg, base, traces, mixed))
}

/// Runs independent per-index jobs. Implementations may reorder or
/// parallelize freely; results are returned in index order.
pub trait Executor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}

pub fn generate_batch(
    dataset: &Dataset,
    indices: &[usize],
    cfg: &MultiViewConfig,
    seed: u64,
    step: u64,
) -> Result<Vec<ViewBatch>> {
    generate_batch_on(&Sequential, dataset, indices, cfg, seed, step)
}

/// Batch driver. Each image's randomness is keyed by `(seed, step, dataset
/// index)`, so the output does not depend on the executor.
pub fn generate_batch_on<E: Executor>(
    exec: &E,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &MultiViewConfig,
    seed: u64,
    step: u64,
) -> Result<Vec<ViewBatch>> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::Empty("index list"));
    }
    for &i in indices {
        dataset.get(i)?;
    }
    if cfg.strategy == Strategy::CutMix && indices.len() < 2 {
        return Err(Error::CutMixNeedsBatch);
    }

    let streams: Vec<RngStream> = indices.iter().map(|&i| image_stream(seed, step, i)).collect();
    let bases = exec.map(indices.len(), |p| {
        base_views(&dataset.items()[indices[p]].image, cfg, &streams[p])
    });
    let (views, traces): (Vec<_>, Vec<_>) = bases.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();

    let mixed = exec.map(indices.len(), |p| {
        let pool = DonorPool {
            views: &views,
            indices,
            position: p,
        };
        mix_views(&views[p], cfg, &streams[p], Some(&pool))
    });
    let mixed = mixed.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(views
        .into_iter()
        .zip(traces)
        .zip(mixed)
        .zip(indices)
        .map(|(((b, t), m), &idx)| assemble(idx, cfg, b, t, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{DatasetSource, LabeledImage};

    fn noise(w: usize, seed: u64) -> Image {
        let mut r = RngStream::new(seed);
        let data = (0..w * w * 3).map(|_| r.below(256) as u8).collect();
        Image::from_u8(w, w, 3, data).unwrap()
    }

    fn dataset(n: usize) -> Dataset {
        let items = (0..n)
            .map(|i| LabeledImage {
                image: noise(16, i as u64),
                label: (i % 10) as u8,
            })
            .collect();
        Dataset::new(items, DatasetSource::default()).unwrap()
    }

    #[test]
    fn baseline_has_no_boxes() {
        let cfg = MultiViewConfig::new(Strategy::Baseline, PipelineSpec::simclr(16));
        let b = generate_views(&noise(16, 1), &cfg, &RngStream::new(1)).unwrap();
        assert_eq!(b.views.len(), 2);
        assert!(b.provenance.iter().all(|p| !p.applied && p.bbox.is_none()));
    }

    #[test]
    fn forced_viewmix_uses_other_view() {
        let mut cfg = MultiViewConfig::new(Strategy::ViewMix, PipelineSpec::simclr(16));
        cfg.strategy_probability = 1.0;
        let b = generate_views(&noise(16, 2), &cfg, &RngStream::new(2)).unwrap();
        assert_eq!(b.provenance[0].donor_view, Some(1));
        assert_eq!(b.provenance[1].donor_view, Some(0));
        assert!(b.provenance.iter().all(|p| p.applied && p.bbox.is_some()));
    }

    #[test]
    fn cutmix_single_image_rejected() {
        let cfg = MultiViewConfig::new(Strategy::CutMix, PipelineSpec::simclr(16));
        assert_eq!(
            generate_views(&noise(16, 3), &cfg, &RngStream::new(0)).unwrap_err(),
            Error::CutMixNeedsBatch
        );
        assert_eq!(
            generate_batch(&dataset(3), &[1], &cfg, 0, 0).unwrap_err(),
            Error::CutMixNeedsBatch
        );
    }

    #[test]
    fn viewmix_needs_two_views() {
        let mut cfg = MultiViewConfig::new(Strategy::ViewMix, PipelineSpec::simclr(16));
        cfg.num_views = 1;
        assert!(cfg.validate().is_err());
        cfg.strategy = Strategy::Cutout;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn empty_and_out_of_range_indices() {
        let cfg = MultiViewConfig::new(Strategy::Baseline, PipelineSpec::simclr(16));
        let ds = dataset(2);
        assert!(generate_batch(&ds, &[], &cfg, 0, 0).is_err());
        assert!(matches!(
            generate_batch(&ds, &[2], &cfg, 0, 0),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn cutmix_donor_is_other_image() {
        let mut cfg = MultiViewConfig::new(Strategy::CutMix, PipelineSpec::simclr(16));
        cfg.strategy_probability = 1.0;
        let out = generate_batch(&dataset(4), &[0, 1, 2, 3], &cfg, 5, 0).unwrap();
        for b in &out {
            for p in &b.provenance {
                assert!(p.donor_image.is_some());
                assert_ne!(p.donor_image, Some(b.source_index));
            }
        }
    }

    #[test]
    fn per_pair_mixes_all_views_together() {
        let mut cfg = MultiViewConfig::new(Strategy::ViewMix, PipelineSpec::simclr(16));
        cfg.gate_scope = GateScope::PerPair;
        cfg.strategy_probability = 0.5;
        let out = generate_batch(&dataset(40), &(0..40).collect::<Vec<_>>(), &cfg, 1, 0).unwrap();
        let mut both = 0;
        for b in &out {
            assert_eq!(b.provenance[0].applied, b.provenance[1].applied);
            both += b.provenance[0].applied as usize;
        }
        assert!(both > 5 && both < 35);
    }

    #[test]
    fn view_pipeline_overrides() {
        let mut cfg = MultiViewConfig::new(Strategy::Baseline, PipelineSpec::simclr(16));
        let mut solar = PipelineSpec::simclr(16);
        solar.steps[5].probability = 1.0;
        let mut plain = PipelineSpec::simclr(16);
        plain.steps[5].probability = 0.0;
        cfg.view_pipelines = alloc::vec![plain, solar];
        let b = generate_views(&noise(16, 9), &cfg, &RngStream::new(0)).unwrap();
        assert!(!b.provenance[0].trace.steps[5].fired);
        assert!(b.provenance[1].trace.steps[5].fired);
        assert_eq!(count_invocations(&cfg).base[5], 1.0);
        cfg.view_pipelines.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn expected_counts_match_between_baseline_and_viewmix() {
        let base = MultiViewConfig::new(Strategy::Baseline, PipelineSpec::simclr(32));
        let mix = MultiViewConfig::new(Strategy::ViewMix, PipelineSpec::simclr(32));
        let cut = MultiViewConfig::new(Strategy::CutMix, PipelineSpec::simclr(32));
        assert_eq!(count_invocations(&base).base, count_invocations(&mix).base);
        assert_eq!(count_invocations(&base).base, count_invocations(&cut).base);
        assert_eq!(count_invocations(&base).regional, 0.0);
        assert!((count_invocations(&mix).regional - 0.66).abs() < 1e-12);
    }
}
