//! Command-line surface. The config file is the base record; `--set`
//! overrides apply in order, then the dedicated flags (`--seed`,
//! `--threads`, `--dataset`) win over both.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use viewmix_core::{Dataset, Pixels};

use crate::bench::{emit_report, run_benchmark, ReportFormat};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::parallel::{generate_batch_parallel, RayonExecutor};
use crate::preview::{render_preview, write_png};
use crate::provenance::write_provenance;
use crate::stats::{render_stats, run_stats, StatsOptions};
use crate::tensor::{batch_shape, header, write_payload, write_tensor, TensorData};

#[derive(Debug, Parser)]
#[command(name = "viewmix", version, about = "Multi-view augmentation engine with ViewMix, Cutout and CutMix")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a dataset and dump it as an (N, H, W, C) tensor.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Also write labels as an (N,) u8 tensor.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Generate views for every dataset image and export them.
    Augment {
        #[command(flatten)]
        common: Common,
        /// Line-delimited JSON provenance, one record per view.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Render a PNG grid: original, view A, view B, strategy result.
    Preview {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        images: Option<usize>,
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Firing rates, box histograms and donor counts over many images.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Time view generation per strategy.
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// `section.key=value`; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Dataset path; overrides `dataset.path`.
    #[arg(long)]
    pub dataset: Option<String>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::load(self.config.as_deref(), &self.overrides)?;
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(p) = &self.dataset {
            cfg.dataset.path = Some(p.clone());
        }
        Ok(cfg)
    }

    fn output(&self, what: &str) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("{what} needs --output")))
    }
}

fn require_seed(cfg: &Config, cmd: &str) -> Result<u64> {
    cfg.seed
        .ok_or_else(|| Error::Usage(format!("{cmd} needs a seed: pass --seed or set `seed` in the config")))
}

fn threads(cfg: &Config) -> usize {
    cfg.threads.unwrap_or(1)
}

fn ingest(common: &Common, labels: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let out = common.output("ingest")?;
    let ds = cfg.load_dataset()?;
    let (w, h, c) = ds.shape();
    let mut data = Vec::with_capacity(ds.len() * w * h * c);
    for item in ds.items() {
        match item.image.pixels() {
            Pixels::U8(v) => data.extend_from_slice(v),
            Pixels::F32(_) => return Err(Error::Other("ingest expects byte images".into())),
        }
    }
    write_tensor(out, &[ds.len(), h, w, c], &TensorData::U8(data))?;
    if let Some(p) = labels {
        let l: Vec<u8> = ds.items().iter().map(|i| i.label).collect();
        write_tensor(p, &[l.len()], &TensorData::U8(l))?;
    }
    println!("ingested {} images of {w}x{h}x{c} -> {}", ds.len(), out.display());
    Ok(())
}

fn augment(common: &Common, provenance: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let seed = require_seed(&cfg, "augment")?;
    let out = common.output("augment")?;
    let ds = cfg.load_dataset()?;
    let mv = cfg.multiview_config(cfg.output_size(&ds))?;
    let layout = cfg.layout()?;
    let batch = cfg.augment.batch_size;
    if batch == 0 {
        return Err(Error::Config("augment.batch_size must be at least 1".into()));
    }
    let step = cfg.augment.step;
    let exec = RayonExecutor::new(threads(&cfg))?;

    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);
    let mut prov = match provenance {
        Some(p) => Some((p, BufWriter::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?))),
        None => None,
    };
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut shape: Option<Vec<usize>> = None;
    for chunk in all.chunks(batch) {
        let batches = generate_batch_parallel(&exec, &ds, chunk, &mv, seed, step)?;
        let (dtype, s) = batch_shape(&batches, layout)?;
        match &shape {
            None => {
                let mut full = s.clone();
                full[0] = ds.len();
                w.write_all(&header(dtype, &full)).map_err(|e| Error::io(out, e))?;
                shape = Some(full);
            }
            Some(full) if full[1..] != s[1..] => {
                return Err(Error::Other(format!("view shape changed mid-export: {:?} vs {:?}", &full[1..], &s[1..])))
            }
            Some(_) => {}
        }
        write_payload(&batches, layout, &mut w).map_err(|e| Error::io(out, e))?;
        if let Some((p, pw)) = prov.as_mut() {
            write_provenance(step, &batches, pw).map_err(|e| Error::io(*p, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    if let Some((p, mut pw)) = prov {
        pw.flush().map_err(|e| Error::io(p, e))?;
    }
    let shape = shape.unwrap_or_default();
    println!(
        "augmented {} images x {} views, strategy {}, seed {}, step {}, {} thread(s), shape {:?} -> {}",
        ds.len(),
        mv.num_views,
        mv.strategy.name(),
        seed,
        step,
        exec.threads(),
        shape,
        out.display()
    );
    Ok(())
}

fn preview(common: &Common, images: Option<usize>, scale: Option<usize>) -> Result<()> {
    let cfg = common.load()?;
    let out = common.output("preview")?;
    let seed = cfg.seed.unwrap_or(0);
    let ds = cfg.load_dataset()?;
    let mv = cfg.multiview_config(cfg.output_size(&ds))?;
    let grid = render_preview(
        &ds,
        &mv,
        seed,
        images.unwrap_or(cfg.preview.images),
        scale.unwrap_or(cfg.preview.scale),
    )?;
    write_png(&grid.image, out)?;
    println!(
        "preview {}x{} grid ({}), seed {} -> {}",
        grid.rows,
        grid.columns,
        mv.strategy.name(),
        seed,
        out.display()
    );
    Ok(())
}

fn stats(common: &Common, samples: Option<usize>) -> Result<()> {
    let cfg = common.load()?;
    let seed = cfg.seed.unwrap_or(0);
    let ds = cfg.load_dataset()?;
    let mv = cfg.multiview_config(cfg.output_size(&ds))?;
    let opts = StatsOptions {
        samples: samples.unwrap_or(cfg.stats.samples),
        batch_size: cfg.augment.batch_size,
        bins: cfg.stats.bins,
        monte_carlo_samples: 100_000,
        threads: threads(&cfg),
    };
    let report = run_stats(&ds, &mv, seed, &opts)?;
    print!("{}", render_stats(&report));
    if let Some(out) = &common.output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(out, json + "\n").map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn bench(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let seed = require_seed(&cfg, "bench")?;
    let ds = load_bench_dataset(&cfg)?;
    let template = cfg.multiview_config(cfg.output_size(&ds))?;
    let bc = cfg.bench_config(ds.shape().0, template)?;
    let report = run_benchmark(&bc, &ds, seed)?;
    print!("{}", emit_report(&report, ReportFormat::Human));
    let csv = emit_report(&report, ReportFormat::Delimited);
    println!();
    print!("{csv}");
    if let Some(out) = &common.output {
        std::fs::write(out, &csv).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn load_bench_dataset(cfg: &Config) -> Result<Dataset> {
    let mut cfg = cfg.clone();
    // A synthetic bench set follows the requested resolution.
    if cfg.dataset.format == "synthetic" {
        if let Some(r) = cfg.bench.resolution {
            cfg.dataset.resolution = r;
        }
        cfg.dataset.count = cfg.dataset.count.max(cfg.bench.batch_size);
    }
    cfg.load_dataset()
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest { common, labels } => ingest(common, labels.as_deref()),
        Command::Augment { common, provenance } => augment(common, provenance.as_deref()),
        Command::Preview { common, images, scale } => preview(common, *images, *scale),
        Command::Stats { common, samples } => stats(common, *samples),
        Command::Bench { common } => bench(common),
    }
}

/// 0 success, 1 runtime error, 2 usage or config error.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Usage(_) | Error::Config(_)) => 2,
        Err(_) => 1,
    }
}
