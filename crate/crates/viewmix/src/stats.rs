//! Empirical checks over many view generations: gate firing rates against
//! binomial intervals, box-size histograms, donor choice, and a Monte-Carlo
//! reference for the mean clipped-area fraction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use viewmix_core::multiview::generate_batch_on;
use viewmix_core::{Dataset, GateScope, LambdaMode, MultiViewConfig, Strategy};

use crate::bench::batch_indices;
use crate::error::{Error, Result};
use crate::parallel::RayonExecutor;

/// Two-sided 99.9% standard normal quantile.
pub const Z_999: f64 = 3.290_526_731_491_926;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStat {
    pub name: String,
    pub probability: f64,
    pub trials: u64,
    pub fired: u64,
    pub rate: f64,
    /// Interval the observed rate should fall in: `p ± z·sqrt(p(1-p)/n)`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub flagged: bool,
}

impl RateStat {
    pub fn new(name: impl Into<String>, probability: f64, trials: u64, fired: u64) -> Self {
        let n = trials.max(1) as f64;
        let rate = fired as f64 / n;
        let half = Z_999 * (probability * (1.0 - probability) / n).sqrt();
        let (ci_low, ci_high) = ((probability - half).max(0.0), (probability + half).min(1.0));
        Self {
            name: name.into(),
            probability,
            trials,
            fired,
            rate,
            ci_low,
            ci_high,
            flagged: trials > 0 && !(ci_low..=ci_high).contains(&rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub low: f64,
    pub high: f64,
    /// A single bin when `low == high`.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(low: f64, high: f64, bins: usize) -> Self {
        let bins = if low == high { 1 } else { bins.max(1) };
        Self {
            low,
            high,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, x: f64) {
        let n = self.counts.len();
        let i = if self.high > self.low {
            (((x - self.low) / (self.high - self.low)) * n as f64).floor().clamp(0.0, n as f64 - 1.0) as usize
        } else {
            0
        };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.high - self.low) / self.counts.len() as f64;
        (self.low + w * i as f64, self.low + w * (i + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub samples: usize,
    pub num_views: usize,
    pub strategy: String,
    pub seed: u64,
    pub threads: usize,
    pub rates: Vec<RateStat>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_histogram: Histogram,
    pub area_histogram: Histogram,
    pub mean_area_fraction: Option<f64>,
    pub monte_carlo_area_fraction: Option<f64>,
    pub monte_carlo_samples: usize,
    /// Relative gap to the Monte-Carlo mean exceeds 1%.
    pub area_flagged: bool,
    /// Donor view index for viewmix and cutmix.
    pub donor_views: BTreeMap<usize, u64>,
    /// Donor's position relative to the source image in dataset order, for cutmix.
    pub donor_images: BTreeMap<usize, u64>,
}

impl StatsReport {
    pub fn any_flagged(&self) -> bool {
        self.area_flagged || self.rates.iter().any(|r| r.flagged)
    }
}

/// Clipped box size by direct enumeration of covered pixel columns/rows.
fn enumerate_clipped(size: usize, lambda: f64, center: f64) -> usize {
    let n = (lambda * size as f64 + 0.5).floor().max(1.0) as i64;
    let start = (center - n as f64 / 2.0 + 0.5).floor() as i64;
    let covered = (start..start + n).filter(|&k| (0..size as i64).contains(&k)).count();
    covered.max(1)
}

/// Mean clipped-area fraction from an independent generator.
pub fn monte_carlo_area_fraction(
    width: usize,
    height: usize,
    r_min: f64,
    r_max: f64,
    mode: LambdaMode,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let r = if r_min == r_max { r_min } else { rng.gen_range(r_min..r_max) };
        let lambda = match mode {
            LambdaMode::Linear => r,
            LambdaMode::Area => r.sqrt(),
        };
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        total += (enumerate_clipped(width, lambda, cx) * enumerate_clipped(height, lambda, cy)) as f64
            / (width * height) as f64;
    }
    total / samples as f64
}

pub struct StatsOptions {
    pub samples: usize,
    pub batch_size: usize,
    pub bins: usize,
    pub monte_carlo_samples: usize,
    pub threads: usize,
}

pub fn run_stats(dataset: &Dataset, cfg: &MultiViewConfig, seed: u64, opts: &StatsOptions) -> Result<StatsReport> {
    cfg.validate()?;
    if opts.samples == 0 {
        return Err(Error::Config("stats samples must be at least 1".into()));
    }
    let exec = RayonExecutor::new(opts.threads)?;
    let batch = opts.batch_size.clamp(1, dataset.len());
    if cfg.strategy == Strategy::CutMix && batch < 2 {
        return Err(viewmix_core::Error::CutMixNeedsBatch.into());
    }
    let size = cfg.output_size();

    // (view, step) -> (kind name, probability, trials, fired)
    let mut gates: BTreeMap<(usize, usize), (String, f64, u64, u64)> = BTreeMap::new();
    let (mut reg_trials, mut reg_fired) = (0u64, 0u64);
    let mut lambda_hist = Histogram::new(cfg.r_min, cfg.r_max, opts.bins);
    if cfg.lambda_mode == LambdaMode::Area {
        lambda_hist = Histogram::new(cfg.r_min.sqrt(), cfg.r_max.sqrt(), opts.bins);
    }
    let mut area_hist = Histogram::new(0.0, 1.0, opts.bins);
    let (mut lmin, mut lmax, mut area_sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let mut donor_views = BTreeMap::new();
    let mut donor_images = BTreeMap::new();

    let mut done = 0;
    let mut step = 0u64;
    while done < opts.samples {
        let take = batch.min(opts.samples - done);
        let mut idx = batch_indices(step as usize, batch, dataset.len());
        idx.truncate(take.max(if cfg.strategy == Strategy::CutMix { 2 } else { 1 }));
        let out = generate_batch_on(&exec, dataset, &idx, cfg, seed, step)?;
        for b in out.iter().take(take) {
            let mut any = false;
            for p in &b.provenance {
                for (k, s) in p.trace.steps.iter().enumerate() {
                    let prob = cfg.pipeline_for(p.view).steps[k].probability;
                    let e = gates
                        .entry((p.view, k))
                        .or_insert_with(|| (s.kind.name().to_string(), prob, 0, 0));
                    e.2 += 1;
                    e.3 += s.fired as u64;
                }
                any |= p.applied;
                if let Some(bb) = &p.bbox {
                    lmin = lmin.min(bb.lambda);
                    lmax = lmax.max(bb.lambda);
                    lambda_hist.add(bb.lambda);
                    area_hist.add(bb.area_fraction());
                    area_sum += bb.area_fraction();
                }
                if let Some(d) = p.donor_view {
                    *donor_views.entry(d).or_insert(0) += 1;
                }
                if let Some(d) = p.donor_image {
                    let offset = (d + dataset.len() - b.source_index) % dataset.len();
                    *donor_images.entry(offset).or_insert(0) += 1;
                }
                if cfg.gate_scope == GateScope::PerView && cfg.strategy != Strategy::Baseline {
                    reg_trials += 1;
                    reg_fired += p.applied as u64;
                }
            }
            if cfg.gate_scope == GateScope::PerPair && cfg.strategy != Strategy::Baseline {
                reg_trials += 1;
                reg_fired += any as u64;
            }
        }
        done += take;
        step += 1;
    }

    // Views sharing a pipeline are pooled per step position; with per-view
    // pipelines each view is reported separately.
    let shared = cfg.view_pipelines.is_empty();
    let mut pooled: BTreeMap<(usize, usize), (String, f64, u64, u64)> = BTreeMap::new();
    for ((view, k), (name, prob, t, f)) in gates {
        let (key, label) = if shared { ((0, k), name) } else { ((view, k), format!("{name}[view {view}]")) };
        let e = pooled.entry(key).or_insert((label, prob, 0, 0));
        e.2 += t;
        e.3 += f;
    }
    let mut rates: Vec<RateStat> = pooled
        .into_values()
        .map(|(name, p, t, f)| RateStat::new(name, p, t, f))
        .collect();
    if cfg.strategy != Strategy::Baseline {
        rates.push(RateStat::new(cfg.strategy.name(), cfg.strategy_probability, reg_trials, reg_fired));
    }

    let boxes = area_hist.total();
    let mean_area = (boxes > 0).then(|| area_sum / boxes as f64);
    let mc = (cfg.strategy != Strategy::Baseline && opts.monte_carlo_samples > 0).then(|| {
        monte_carlo_area_fraction(size, size, cfg.r_min, cfg.r_max, cfg.lambda_mode, opts.monte_carlo_samples, seed ^ 0x5eed)
    });
    let area_flagged = match (mean_area, mc) {
        (Some(m), Some(o)) => (m - o).abs() / o > 0.01,
        _ => false,
    };
    Ok(StatsReport {
        samples: opts.samples,
        num_views: cfg.num_views,
        strategy: cfg.strategy.name().into(),
        seed,
        threads: opts.threads,
        rates,
        lambda_min: lmin.is_finite().then_some(lmin),
        lambda_max: lmax.is_finite().then_some(lmax),
        lambda_histogram: lambda_hist,
        area_histogram: area_hist,
        mean_area_fraction: mean_area,
        monte_carlo_area_fraction: mc,
        monte_carlo_samples: if mc.is_some() { opts.monte_carlo_samples } else { 0 },
        area_flagged,
        donor_views,
        donor_images,
    })
}

fn write_hist(out: &mut String, title: &str, h: &Histogram) {
    let _ = writeln!(out, "{title} ({} samples):", h.total());
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1);
    for (i, c) in h.counts.iter().enumerate() {
        let (a, b) = h.bin_edges(i);
        let bar = "#".repeat((c * 40 / peak) as usize);
        if h.low == h.high {
            let _ = writeln!(out, "  {:>7.4}          {:>8} {bar}", a, c);
        } else {
            let _ = writeln!(out, "  [{a:.4}, {b:.4}) {c:>8} {bar}");
        }
    }
}

pub fn render_stats(r: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "stats: {} images x {} views, strategy {}, seed {}, {} thread(s)",
        r.samples, r.num_views, r.strategy, r.seed, r.threads
    );
    let _ = writeln!(
        out,
        "{:<26} {:>6} {:>9} {:>9} {:>8}  {:<19} flag",
        "gate", "p", "trials", "fired", "rate", "99.9% interval"
    );
    for s in &r.rates {
        let _ = writeln!(
            out,
            "{:<26} {:>6.3} {:>9} {:>9} {:>8.5}  [{:.5}, {:.5}] {}",
            s.name,
            s.probability,
            s.trials,
            s.fired,
            s.rate,
            s.ci_low,
            s.ci_high,
            if s.flagged { "OUTSIDE" } else { "ok" }
        );
    }
    if let (Some(lo), Some(hi)) = (r.lambda_min, r.lambda_max) {
        let _ = writeln!(out, "lambda observed range: [{lo:.6}, {hi:.6}]");
    }
    write_hist(&mut out, "lambda histogram", &r.lambda_histogram);
    write_hist(&mut out, "clipped-area fraction histogram", &r.area_histogram);
    if let (Some(m), Some(o)) = (r.mean_area_fraction, r.monte_carlo_area_fraction) {
        let _ = writeln!(
            out,
            "mean clipped-area fraction {m:.6} vs Monte-Carlo {o:.6} ({} draws): {:+.3}% {}",
            r.monte_carlo_samples,
            (m / o - 1.0) * 100.0,
            if r.area_flagged { "OUTSIDE 1%" } else { "ok" }
        );
    }
    if !r.donor_views.is_empty() {
        let parts: Vec<String> = r.donor_views.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(out, "donor view index: {}", parts.join(" "));
    }
    if !r.donor_images.is_empty() {
        let parts: Vec<String> = r.donor_images.iter().map(|(k, v)| format!("+{k}:{v}")).collect();
        let _ = writeln!(out, "donor image offset: {}", parts.join(" "));
    }
    out
}
