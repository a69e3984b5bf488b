//! Experiment config file (TOML). Every section is optional; unknown keys
//! anywhere are rejected. Command-line `--set section.key=value` overrides
//! are applied to the parsed tree in order, so the last one wins.

use std::path::Path;

use serde::{Deserialize, Serialize};
use viewmix_core::transforms::{JitterStrengths, DEFAULT_AREA_RANGE, DEFAULT_ASPECT_RANGE, DEFAULT_SIGMA_RANGE, DEFAULT_SOLARIZE_THRESHOLD};
use viewmix_core::{
    Dataset, GateScope, LambdaMode, MultiViewConfig, PipelineSpec, Strategy, Transform, TransformKind,
    TransformSpec,
};

use crate::bench::BenchConfig;
use crate::error::{Error, Result};
use crate::tensor::ExportLayout;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub dataset: DatasetConfig,
    pub pipeline: PipelineConfig,
    pub multiview: MultiViewSection,
    pub augment: AugmentSection,
    pub bench: BenchSection,
    pub stats: StatsSection,
    pub preview: PreviewSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// `cifar10`, `folder` or `synthetic`.
    pub format: String,
    pub path: Option<String>,
    /// Square resize target for `folder`.
    pub resize: Option<usize>,
    /// Keep only the first `limit` items.
    pub limit: Option<usize>,
    /// `synthetic` only.
    pub count: usize,
    pub resolution: usize,
    pub synthetic_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            format: "cifar10".into(),
            path: None,
            resize: None,
            limit: None,
            count: 256,
            resolution: 32,
            synthetic_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Defaults to the dataset image width.
    pub output_size: Option<usize>,
    /// Defaults to the SimCLR stack.
    pub steps: Option<Vec<StepConfig>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub kind: String,
    pub probability: Option<f64>,
    pub area_range: Option<[f64; 2]>,
    pub aspect_range: Option<[f64; 2]>,
    pub brightness: Option<f64>,
    pub contrast: Option<f64>,
    pub saturation: Option<f64>,
    pub hue: Option<f64>,
    pub sigma_range: Option<[f64; 2]>,
    pub threshold: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiViewSection {
    pub num_views: usize,
    pub strategy: String,
    pub strategy_probability: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `linear` or `area`.
    pub lambda_mode: String,
    /// `per_view` or `per_pair`.
    pub gate_scope: String,
    pub fill: f32,
    /// Per-view pipelines; empty means every view uses `[pipeline]`.
    pub view_pipelines: Vec<PipelineConfig>,
}

impl Default for MultiViewSection {
    fn default() -> Self {
        Self {
            num_views: 2,
            strategy: "viewmix".into(),
            strategy_probability: viewmix_core::multiview::DEFAULT_STRATEGY_PROBABILITY,
            r_min: viewmix_core::multiview::DEFAULT_R_MIN,
            r_max: viewmix_core::multiview::DEFAULT_R_MAX,
            lambda_mode: "linear".into(),
            gate_scope: "per_view".into(),
            fill: 0.0,
            view_pipelines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// Images per batch call; CutMix donors come from the same batch.
    pub batch_size: usize,
    pub step: u64,
    /// `nvhwc` or `nvchw`.
    pub layout: String,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            batch_size: 128,
            step: 0,
            layout: "nvhwc".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Defaults to the dataset resolution.
    pub resolution: Option<usize>,
    pub batch_size: usize,
    /// Defaults to 1000 at 32 px and 200 otherwise.
    pub steps: Option<usize>,
    pub strategies: Vec<String>,
    pub warmup_steps: usize,
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            resolution: None,
            batch_size: 128,
            steps: None,
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            warmup_steps: 2,
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub samples: usize,
    pub bins: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            samples: 10_000,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreviewSection {
    pub images: usize,
    /// Integer nearest-neighbour upscale per cell.
    pub scale: usize,
}

impl Default for PreviewSection {
    fn default() -> Self {
        Self { images: 3, scale: 4 }
    }
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    toml::from_str::<toml::Table>(&doc)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.2.c=value` to a TOML tree, creating tables as needed.
/// Numeric segments index into arrays.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override key {key:?} is malformed")));
    }
    set_in_table(root, &path, parse_value(raw.trim()), key.trim())
}

fn set_in_table(table: &mut toml::Table, path: &[&str], value: toml::Value, key: &str) -> Result<()> {
    let (head, rest) = path.split_first().expect("non-empty path");
    if rest.is_empty() {
        table.insert(head.to_string(), value);
        return Ok(());
    }
    let slot = table
        .entry(head.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    set_in_value(slot, rest, value, key)
}

fn set_in_value(slot: &mut toml::Value, path: &[&str], value: toml::Value, key: &str) -> Result<()> {
    match slot {
        toml::Value::Table(t) => set_in_table(t, path, value, key),
        toml::Value::Array(items) => {
            let (head, rest) = path.split_first().expect("non-empty path");
            let idx: usize = head
                .parse()
                .map_err(|_| Error::Usage(format!("{key}: expected a list index, got {head:?}")))?;
            let len = items.len();
            let item = items
                .get_mut(idx)
                .ok_or_else(|| Error::Usage(format!("{key}: index {idx} out of range (len {len})")))?;
            if rest.is_empty() {
                *item = value;
                Ok(())
            } else {
                set_in_value(item, rest, value, key)
            }
        }
        _ => Err(Error::Usage(format!("{key}: cannot descend into a scalar"))),
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_parts(text, &[])
    }

    fn from_parts(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Reads `path` (or starts from defaults) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_parts(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let d = &self.dataset;
        let need_path = || {
            d.path
                .as_deref()
                .ok_or_else(|| Error::Usage(format!("dataset.path is required for format {}", d.format)))
        };
        let ds = match d.format.as_str() {
            "cifar10" => crate::cifar::load_cifar10(need_path()?)?,
            "folder" => crate::folder::load_image_folder(need_path()?, d.resize.map(|s| (s, s)))?,
            "synthetic" => crate::synthetic::synthetic_dataset(d.count, d.resolution, d.synthetic_seed)?,
            other => return Err(Error::Config(format!("dataset.format {other:?} is not cifar10, folder or synthetic"))),
        };
        match d.limit {
            Some(0) => Err(Error::Config("dataset.limit must be at least 1".into())),
            Some(n) if n < ds.len() => {
                let source = ds.source().clone();
                let items = ds.into_items().into_iter().take(n).collect();
                Ok(Dataset::new(items, source)?)
            }
            _ => Ok(ds),
        }
    }

    pub fn output_size(&self, dataset: &Dataset) -> usize {
        self.pipeline.output_size.unwrap_or(dataset.shape().0)
    }

    pub fn multiview_config(&self, output_size: usize) -> Result<MultiViewConfig> {
        let m = &self.multiview;
        let strategy = parse_strategy(&m.strategy)?;
        let base = self.pipeline.to_spec(output_size)?;
        let mut cfg = MultiViewConfig::new(strategy, base);
        cfg.num_views = m.num_views;
        cfg.strategy_probability = m.strategy_probability;
        cfg.r_min = m.r_min;
        cfg.r_max = m.r_max;
        cfg.fill = m.fill;
        cfg.lambda_mode = match m.lambda_mode.as_str() {
            "linear" => LambdaMode::Linear,
            "area" => LambdaMode::Area,
            other => return Err(Error::Config(format!("multiview.lambda_mode {other:?} is not linear or area"))),
        };
        cfg.gate_scope = match m.gate_scope.as_str() {
            "per_view" => GateScope::PerView,
            "per_pair" => GateScope::PerPair,
            other => return Err(Error::Config(format!("multiview.gate_scope {other:?} is not per_view or per_pair"))),
        };
        cfg.view_pipelines = m
            .view_pipelines
            .iter()
            .map(|p| p.to_spec(p.output_size.unwrap_or(output_size)))
            .collect::<Result<_>>()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn layout(&self) -> Result<ExportLayout> {
        ExportLayout::from_name(&self.augment.layout)
            .ok_or_else(|| Error::Config(format!("augment.layout {:?} is not nvhwc or nvchw", self.augment.layout)))
    }

    pub fn bench_config(&self, dataset_resolution: usize, template: MultiViewConfig) -> Result<BenchConfig> {
        let b = &self.bench;
        let resolution = b.resolution.unwrap_or(dataset_resolution);
        let steps = b.steps.unwrap_or(if resolution == 32 { 1000 } else { 200 });
        let strategies = b.strategies.iter().map(|s| parse_strategy(s)).collect::<Result<Vec<_>>>()?;
        let cfg = BenchConfig {
            resolution,
            batch_size: b.batch_size,
            steps,
            strategies,
            warmup_steps: b.warmup_steps,
            repeats: b.repeats,
            threads: self.threads.unwrap_or(1),
            template,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_strategy(name: &str) -> Result<Strategy> {
    Strategy::from_name(name)
        .ok_or_else(|| Error::Config(format!("strategy {name:?} is not baseline, viewmix, cutout or cutmix")))
}

impl PipelineConfig {
    pub fn to_spec(&self, output_size: usize) -> Result<PipelineSpec> {
        let output_size = self.output_size.unwrap_or(output_size);
        let spec = match &self.steps {
            None => PipelineSpec::simclr(output_size),
            Some(steps) => PipelineSpec {
                steps: steps.iter().map(StepConfig::to_spec).collect::<Result<_>>()?,
                output_size,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_probability(kind: TransformKind) -> f64 {
    PipelineSpec::simclr(1)
        .steps
        .iter()
        .find(|s| s.kind() == kind)
        .map(|s| s.probability)
        .unwrap_or(1.0)
}

impl StepConfig {
    fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut push = |set: bool, k| {
            if set {
                keys.push(k)
            }
        };
        push(self.area_range.is_some(), "area_range");
        push(self.aspect_range.is_some(), "aspect_range");
        push(self.brightness.is_some(), "brightness");
        push(self.contrast.is_some(), "contrast");
        push(self.saturation.is_some(), "saturation");
        push(self.hue.is_some(), "hue");
        push(self.sigma_range.is_some(), "sigma_range");
        push(self.threshold.is_some(), "threshold");
        keys
    }

    pub fn to_spec(&self) -> Result<TransformSpec> {
        let kind = TransformKind::from_name(&self.kind)
            .ok_or_else(|| Error::Config(format!("unknown transform kind {:?}", self.kind)))?;
        let allowed: &[&str] = match kind {
            TransformKind::CropRescale => &["area_range", "aspect_range"],
            TransformKind::ColorJitter => &["brightness", "contrast", "saturation", "hue"],
            TransformKind::GaussianBlur => &["sigma_range"],
            TransformKind::Solarize => &["threshold"],
            TransformKind::HorizontalFlip | TransformKind::Grayscale => &[],
        };
        if let Some(bad) = self.set_keys().into_iter().find(|k| !allowed.contains(k)) {
            return Err(Error::Config(format!("key {bad:?} does not apply to {kind}")));
        }
        let defaults = JitterStrengths::default();
        let transform = match kind {
            TransformKind::CropRescale => Transform::CropRescale {
                area_range: self.area_range.unwrap_or(DEFAULT_AREA_RANGE),
                aspect_range: self.aspect_range.unwrap_or(DEFAULT_ASPECT_RANGE),
            },
            TransformKind::HorizontalFlip => Transform::HorizontalFlip,
            TransformKind::ColorJitter => Transform::ColorJitter(JitterStrengths {
                brightness: self.brightness.unwrap_or(defaults.brightness),
                contrast: self.contrast.unwrap_or(defaults.contrast),
                saturation: self.saturation.unwrap_or(defaults.saturation),
                hue: self.hue.unwrap_or(defaults.hue),
            }),
            TransformKind::Grayscale => Transform::Grayscale,
            TransformKind::GaussianBlur => Transform::GaussianBlur {
                sigma_range: self.sigma_range.unwrap_or(DEFAULT_SIGMA_RANGE),
            },
            TransformKind::Solarize => Transform::Solarize {
                threshold: self.threshold.unwrap_or(DEFAULT_SOLARIZE_THRESHOLD),
            },
        };
        Ok(TransformSpec::new(
            transform,
            self.probability.unwrap_or_else(|| default_probability(kind)),
        ))
    }
}
