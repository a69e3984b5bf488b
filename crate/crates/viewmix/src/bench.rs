//! Transformation-overhead benchmark. Only view generation is timed: the
//! dataset is decoded into memory beforehand, and each timed step is one
//! `generate_batch` call over a fixed index sequence shared by every
//! strategy.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use viewmix_core::multiview::{generate_batch_on, InvocationCounts};
use viewmix_core::{Dataset, MultiViewConfig, Pixels, Strategy, TransformKind};

use crate::error::{Error, Result};
use crate::parallel::RayonExecutor;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub resolution: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub strategies: Vec<Strategy>,
    pub warmup_steps: usize,
    pub repeats: usize,
    pub threads: usize,
    /// Everything except `strategy`, which is overwritten per run.
    pub template: MultiViewConfig,
}

impl BenchConfig {
    /// Table defaults: batch 128; 1000 steps at 32 px, 200 otherwise.
    pub fn standard(resolution: usize, template: MultiViewConfig) -> Self {
        Self {
            resolution,
            batch_size: 128,
            steps: if resolution == 32 { 1000 } else { 200 },
            strategies: Strategy::ALL.to_vec(),
            warmup_steps: 2,
            repeats: 3,
            threads: 1,
            template,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Core(viewmix_core::Error::Parameter(m.into())));
        if self.steps == 0 {
            return bad("bench steps must be at least 1");
        }
        if self.repeats == 0 {
            return bad("bench repeats must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("bench batch_size must be at least 1");
        }
        if self.threads == 0 {
            return bad("bench threads must be at least 1");
        }
        if self.template.output_size() != self.resolution {
            return Err(Error::Config(format!(
                "pipeline output_size {} differs from bench resolution {}",
                self.template.output_size(),
                self.resolution
            )));
        }
        self.template.validate()?;
        Ok(())
    }

    fn config_for(&self, strategy: Strategy) -> MultiViewConfig {
        let mut cfg = self.template.clone();
        cfg.strategy = strategy;
        cfg.retain_base_views = false;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub strategy: Strategy,
    /// Mean over repeats of the summed step times.
    pub total_seconds: f64,
    pub seconds_per_step_mean: f64,
    /// Sample standard deviation across repeats; 0 for a single repeat.
    pub seconds_per_step_std: f64,
    /// Source images per second.
    pub images_per_second: f64,
    /// `total / baseline_total - 1`; `None` when baseline was not run.
    pub relative_overhead: Option<f64>,
    /// Counts from one repeat of the timed steps.
    pub invocation_counts: InvocationCounts,
    /// SHA-256 over base views of the first `digest_steps` steps.
    pub base_view_digest: String,
    pub repeat_totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub resolution: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub warmup_steps: usize,
    pub repeats: usize,
    pub threads: usize,
    pub num_views: usize,
    pub digest_steps: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyReport>,
}

impl BenchReport {
    pub fn get(&self, strategy: Strategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }
}

/// Batch indices for step `step`: `(step * B + k) mod N`.
pub fn batch_indices(step: usize, batch_size: usize, len: usize) -> Vec<usize> {
    (0..batch_size).map(|k| (step * batch_size + k) % len).collect()
}

const DIGEST_STEPS: usize = 2;

fn hash_base_views(
    exec: &RayonExecutor,
    dataset: &Dataset,
    cfg: &BenchConfig,
    strategy: Strategy,
    seed: u64,
    steps: usize,
) -> Result<String> {
    let mut mv = cfg.config_for(strategy);
    mv.retain_base_views = true;
    let mut h = Sha256::new();
    for s in 0..steps {
        let idx = batch_indices(s, cfg.batch_size, dataset.len());
        for b in generate_batch_on(exec, dataset, &idx, &mv, seed, s as u64)? {
            for v in b.base_views.as_deref().unwrap_or_default() {
                match v.pixels() {
                    Pixels::U8(d) => h.update(d),
                    Pixels::F32(d) => d.iter().for_each(|x| h.update(x.to_le_bytes())),
                }
            }
        }
    }
    Ok(h.finalize().iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    }))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_benchmark(cfg: &BenchConfig, dataset: &Dataset, seed: u64) -> Result<BenchReport> {
    cfg.validate()?;
    let (w, h, _) = dataset.shape();
    if (w, h) != (cfg.resolution, cfg.resolution) {
        return Err(Error::Config(format!(
            "dataset images are {w}x{h}, bench resolution is {0}x{0}",
            cfg.resolution
        )));
    }
    if dataset.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "dataset has {} images, fewer than batch_size {}",
            dataset.len(),
            cfg.batch_size
        )));
    }
    let exec = RayonExecutor::new(cfg.threads)?;
    let n = cfg.strategies.len();
    let mut totals = vec![Vec::with_capacity(cfg.repeats); n];
    let mut counts = vec![InvocationCounts::default(); n];
    let configs: Vec<MultiViewConfig> = cfg.strategies.iter().map(|s| cfg.config_for(*s)).collect();

    for mv in &configs {
        for s in 0..cfg.warmup_steps {
            let idx = batch_indices(s, cfg.batch_size, dataset.len());
            black_box(generate_batch_on(&exec, dataset, &idx, mv, seed, s as u64)?);
        }
    }
    // Strategies are interleaved within each repeat so slow drift in machine
    // state is shared rather than charged to whichever ran last.
    for repeat in 0..cfg.repeats {
        for (k, mv) in configs.iter().enumerate() {
            let mut elapsed = 0.0;
            let mut c = InvocationCounts::default();
            for s in 0..cfg.steps {
                let idx = batch_indices(s, cfg.batch_size, dataset.len());
                let t0 = Instant::now();
                let out = generate_batch_on(&exec, dataset, &idx, mv, seed, s as u64)?;
                elapsed += t0.elapsed().as_secs_f64();
                if repeat == 0 {
                    c.add(&InvocationCounts::from_batches(&out));
                }
                drop(black_box(out));
            }
            if repeat == 0 {
                counts[k] = c;
            }
            totals[k].push(elapsed);
        }
    }

    let digest_steps = DIGEST_STEPS.min(cfg.steps);
    let mut reports = Vec::with_capacity(n);
    for (k, &strategy) in cfg.strategies.iter().enumerate() {
        let per_step: Vec<f64> = totals[k].iter().map(|t| t / cfg.steps as f64).collect();
        let (spm, sps) = mean_std(&per_step);
        let total = mean_std(&totals[k]).0;
        reports.push(StrategyReport {
            strategy,
            total_seconds: total,
            seconds_per_step_mean: spm,
            seconds_per_step_std: sps,
            images_per_second: (cfg.batch_size * cfg.steps) as f64 / total,
            relative_overhead: None,
            invocation_counts: counts[k],
            base_view_digest: hash_base_views(&exec, dataset, cfg, strategy, seed, digest_steps)?,
            repeat_totals: totals[k].clone(),
        });
    }
    if let Some(base) = reports.iter().find(|r| r.strategy == Strategy::Baseline).map(|r| r.total_seconds) {
        for r in &mut reports {
            r.relative_overhead = Some(r.total_seconds / base - 1.0);
        }
        // Exactly zero for the baseline itself, independent of rounding.
        for r in reports.iter_mut().filter(|r| r.strategy == Strategy::Baseline) {
            r.relative_overhead = Some(0.0);
        }
    }
    Ok(BenchReport {
        resolution: cfg.resolution,
        batch_size: cfg.batch_size,
        steps: cfg.steps,
        warmup_steps: cfg.warmup_steps,
        repeats: cfg.repeats,
        threads: cfg.threads,
        num_views: cfg.template.num_views,
        digest_steps,
        seed,
        strategies: reports,
    })
}

/// One line of the delimited report. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelimitedRow {
    pub strategy: String,
    pub resolution: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub repeats: usize,
    pub threads: usize,
    pub total_seconds: f64,
    pub seconds_per_step_mean: f64,
    pub seconds_per_step_std: f64,
    pub images_per_second: f64,
    pub relative_overhead: Option<f64>,
    pub crop_rescale: u64,
    pub horizontal_flip: u64,
    pub color_jitter: u64,
    pub grayscale: u64,
    pub gaussian_blur: u64,
    pub solarize: u64,
    pub regional: u64,
    pub base_view_digest: String,
}

pub const DELIMITED_COLUMNS: [&str; 19] = [
    "strategy",
    "resolution",
    "batch_size",
    "steps",
    "repeats",
    "threads",
    "total_seconds",
    "seconds_per_step_mean",
    "seconds_per_step_std",
    "images_per_second",
    "relative_overhead",
    "crop_rescale",
    "horizontal_flip",
    "color_jitter",
    "grayscale",
    "gaussian_blur",
    "solarize",
    "regional",
    "base_view_digest",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Delimited,
}

fn rows(report: &BenchReport) -> Vec<DelimitedRow> {
    report
        .strategies
        .iter()
        .map(|s| {
            let b = s.invocation_counts.base;
            DelimitedRow {
                strategy: s.strategy.name().into(),
                resolution: report.resolution,
                batch_size: report.batch_size,
                steps: report.steps,
                repeats: report.repeats,
                threads: report.threads,
                total_seconds: s.total_seconds,
                seconds_per_step_mean: s.seconds_per_step_mean,
                seconds_per_step_std: s.seconds_per_step_std,
                images_per_second: s.images_per_second,
                relative_overhead: s.relative_overhead,
                crop_rescale: b[TransformKind::CropRescale.index()],
                horizontal_flip: b[TransformKind::HorizontalFlip.index()],
                color_jitter: b[TransformKind::ColorJitter.index()],
                grayscale: b[TransformKind::Grayscale.index()],
                gaussian_blur: b[TransformKind::GaussianBlur.index()],
                solarize: b[TransformKind::Solarize.index()],
                regional: s.invocation_counts.regional,
                base_view_digest: s.base_view_digest.clone(),
            }
        })
        .collect()
}

fn delimited(report: &BenchReport) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(DELIMITED_COLUMNS).expect("in-memory write");
    for r in rows(report) {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn human(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "benchmark: {0}x{0}, batch {1}, {2} steps, {3} warmup, {4} repeats, {5} thread(s), {6} views, seed {7}",
        report.resolution,
        report.batch_size,
        report.steps,
        report.warmup_steps,
        report.repeats,
        report.threads,
        report.num_views,
        report.seed
    );
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>22} {:>12} {:>10}  base views sha256 (first {} steps)",
        "strategy", "total s", "s/step (mean ± sd)", "images/s", "overhead", report.digest_steps
    );
    for s in &report.strategies {
        let overhead = s
            .relative_overhead
            .map(|o| format!("{:+.2}%", o * 100.0))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            out,
            "{:<10} {:>12.3} {:>22} {:>12.1} {:>10}  {}",
            s.strategy.name(),
            s.total_seconds,
            format!("{:.6} ± {:.6}", s.seconds_per_step_mean, s.seconds_per_step_std),
            s.images_per_second,
            overhead,
            &s.base_view_digest[..16.min(s.base_view_digest.len())]
        );
    }
    let _ = writeln!(out, "base-transform invocations (crop flip jitter gray blur solarize | regional):");
    for s in &report.strategies {
        let c = s.invocation_counts;
        let base: Vec<String> = c.base.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "  {:<10} {} | {}", s.strategy.name(), base.join(" "), c.regional);
    }
    out
}

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Human => human(report),
        ReportFormat::Delimited => delimited(report),
    }
}

/// Parses the delimited form back into rows. The header must match
/// [`DELIMITED_COLUMNS`] exactly.
pub fn parse_delimited(text: &str) -> Result<Vec<DelimitedRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Other(format!("bench report: {e}")))?;
    if header.iter().ne(DELIMITED_COLUMNS) {
        return Err(Error::Other("bench report: unexpected header".into()));
    }
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Other(format!("bench report: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use viewmix_core::PipelineSpec;

    fn tiny(strategies: Vec<Strategy>) -> (BenchConfig, Dataset) {
        let ds = crate::synthetic::synthetic_dataset(8, 16, 1).unwrap();
        let template = MultiViewConfig::new(Strategy::Baseline, PipelineSpec::simclr(16));
        let mut cfg = BenchConfig::standard(16, template);
        cfg.batch_size = 4;
        cfg.steps = 3;
        cfg.warmup_steps = 1;
        cfg.strategies = strategies;
        (cfg, ds)
    }

    #[test]
    fn baseline_only_has_zero_overhead() {
        let (cfg, ds) = tiny(vec![Strategy::Baseline]);
        let r = run_benchmark(&cfg, &ds, 1).unwrap();
        assert_eq!(r.strategies[0].relative_overhead, Some(0.0));
        assert_eq!(r.strategies[0].repeat_totals.len(), 3);
    }

    #[test]
    fn all_strategies_share_base_views() {
        let (cfg, ds) = tiny(Strategy::ALL.to_vec());
        let r = run_benchmark(&cfg, &ds, 5).unwrap();
        let names: Vec<_> = r.strategies.iter().map(|s| s.strategy).collect();
        assert_eq!(names, Strategy::ALL.to_vec());
        let base = r.get(Strategy::Baseline).unwrap();
        for s in &r.strategies {
            assert_eq!(s.base_view_digest, base.base_view_digest);
            assert_eq!(s.invocation_counts.base, base.invocation_counts.base);
            assert!(s.seconds_per_step_std >= 0.0);
        }
        assert_eq!(base.invocation_counts.base[0], 4 * 3 * 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mut cfg, ds) = tiny(vec![Strategy::Baseline]);
        cfg.steps = 0;
        assert!(run_benchmark(&cfg, &ds, 0).is_err());
        let (mut cfg, ds) = tiny(vec![Strategy::Baseline]);
        cfg.batch_size = 9;
        assert!(run_benchmark(&cfg, &ds, 0).is_err());
        let (mut cfg, _) = tiny(vec![Strategy::Baseline]);
        let other = crate::synthetic::synthetic_dataset(8, 20, 1).unwrap();
        cfg.repeats = 1;
        assert!(run_benchmark(&cfg, &other, 0).is_err());
    }

    #[test]
    fn delimited_round_trip() {
        let (mut cfg, ds) = tiny(vec![Strategy::Baseline, Strategy::ViewMix]);
        cfg.repeats = 2;
        let r = run_benchmark(&cfg, &ds, 2).unwrap();
        let text = emit_report(&r, ReportFormat::Delimited);
        let parsed = parse_delimited(&text).unwrap();
        assert_eq!(parsed, rows(&r));
        let human = emit_report(&r, ReportFormat::Human);
        assert!(human.find("baseline").unwrap() < human.find("viewmix").unwrap());
    }

    #[test]
    fn empty_strategies_header_only() {
        let (cfg, ds) = tiny(vec![]);
        let r = run_benchmark(&cfg, &ds, 2).unwrap();
        let text = emit_report(&r, ReportFormat::Delimited);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), DELIMITED_COLUMNS.join(","));
        assert!(parse_delimited(&text).unwrap().is_empty());
    }

    #[test]
    fn indices_cycle() {
        assert_eq!(batch_indices(2, 3, 7), vec![6, 0, 1]);
    }
}
