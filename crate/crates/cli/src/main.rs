use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;

use aquamend::attention::attention_map;
use aquamend::degradation::DegradationImages;
use aquamend::image::{channel_stats, clamp01};
use aquamend::metrics::{MetricReport, MetricRow, MetricValues};
use aquamend::network::load_checkpoint;
use aquamend::trainer::{enhance, list_images, run_training, split_dataset, TrainConfig};
use aquamend::ImageTensor;

/// Self-supervised underwater image enhancement.
#[derive(Parser)]
#[command(name = "aquamend", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Enhance every image in a directory with a trained model.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the degraded and stretched versions of each image.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Only write one stage; all three by default.
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    /// Write the attention map of each image.
    Attention {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Per-channel min/max/median/mean of each image.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Quality metrics; full-reference ones need a reference with the same file name.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Print a seeded train/holdout split of a directory.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    /// Degraded once.
    Dbn,
    /// Degraded twice.
    Star,
    /// Histogram stretched.
    Stretch,
}

impl Stage {
    const ALL: [Stage; 3] = [Stage::Dbn, Stage::Star, Stage::Stretch];

    fn suffix(self) -> &'static str {
        match self {
            Stage::Dbn => "dbn",
            Stage::Star => "star",
            Stage::Stretch => "stretch",
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("input directory {} does not exist", dir.display());
    }
    let paths = list_images(dir)?;
    if paths.is_empty() {
        bail!("no PNG/JPEG images in {}", dir.display());
    }
    Ok(paths)
}

fn load(path: &Path) -> Result<ImageTensor> {
    ImageTensor::load(path).with_context(|| format!("reading {}", path.display()))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_file_name(format!(".{}.tmp", file_name(path)));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn save_clamped(img: &ImageTensor, path: &Path) -> Result<()> {
    let (img, clipped) = clamp01(img);
    if clipped > 0 {
        info!("{}: clipped {clipped} values", path.display());
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn train(config: &Path) -> Result<()> {
    if !config.is_file() {
        bail!("config file {} not found", config.display());
    }
    let cfg = TrainConfig::from_file(config)?;
    let summary = run_training(&cfg)?;
    let last = summary.records.last().map_or(f64::NAN, |r| r.train.total);
    println!("trained {} epochs, final loss {last:.6}", summary.records.len());
    println!("checkpoint: {}", summary.checkpoint.display());
    println!("log: {}", summary.log.display());
    Ok(())
}

fn enhance_dir(model: &Path, input: &Path, output: &Path) -> Result<()> {
    if !model.is_file() {
        bail!("model file {} not found", model.display());
    }
    let params = load_checkpoint(model).with_context(|| format!("loading {}", model.display()))?;
    let paths = inputs(input)?;
    fs::create_dir_all(output)?;
    let started = Instant::now();
    let pixels: usize = paths
        .par_iter()
        .map(|path| {
            let img = load(path)?;
            let out = enhance(&params, &img)?;
            out.save(output.join(format!("{}.png", stem(path))))?;
            Ok(img.pixel_count())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let secs = started.elapsed().as_secs_f64();
    info!("{} images, {:.2} images/s, {:.2} Mpx/s", paths.len(), paths.len() as f64 / secs, pixels as f64 / secs / 1e6);
    println!("enhanced {} images into {}", paths.len(), output.display());
    Ok(())
}

fn degrade_dir(input: &Path, output: &Path, stage: Option<Stage>) -> Result<()> {
    let paths = inputs(input)?;
    fs::create_dir_all(output)?;
    let stages: Vec<Stage> = stage.map_or_else(|| Stage::ALL.to_vec(), |s| vec![s]);
    paths.par_iter().try_for_each(|path| -> Result<()> {
        let img = load(path)?;
        let deg = DegradationImages::compute(&img);
        for s in &stages {
            let out = match s {
                Stage::Dbn => &deg.i_dbn,
                Stage::Star => &deg.i_star,
                Stage::Stretch => &deg.i_c,
            };
            save_clamped(out, &output.join(format!("{}_{}.png", stem(path), s.suffix())))?;
        }
        Ok(())
    })?;
    println!("degraded {} images into {}", paths.len(), output.display());
    Ok(())
}

fn attention_dir(input: &Path, output: &Path) -> Result<()> {
    let paths = inputs(input)?;
    fs::create_dir_all(output)?;
    paths.par_iter().try_for_each(|path| -> Result<()> {
        let map = attention_map(&load(path)?);
        save_clamped(&map.i_at, &output.join(format!("{}_attention.png", stem(path))))
    })?;
    println!("wrote {} attention maps into {}", paths.len(), output.display());
    Ok(())
}

fn stats_csv(input: &Path, csv: &Path) -> Result<()> {
    let paths = inputs(input)?;
    let stats = paths.par_iter().map(|p| Ok(channel_stats(&load(p)?))).collect::<Result<Vec<_>>>()?;
    let mut s = String::from("image");
    for ch in ["r", "g", "b"] {
        for field in ["min", "max", "median", "mean"] {
            let _ = write!(s, ",{ch}_{field}");
        }
    }
    s.push('\n');
    for (path, st) in paths.iter().zip(&stats) {
        s.push_str(&file_name(path));
        for k in 0..3 {
            let _ = write!(s, ",{},{},{},{}", st.min[k], st.max[k], st.median[k], st.mean[k]);
        }
        s.push('\n');
    }
    write_atomic(csv, &s)?;
    println!("wrote statistics for {} images to {}", paths.len(), csv.display());
    Ok(())
}

fn evaluate_csv(input: &Path, reference: Option<&Path>, csv: &Path) -> Result<()> {
    if let Some(dir) = reference.filter(|d| !d.is_dir()) {
        bail!("reference directory {} does not exist", dir.display());
    }
    let paths = inputs(input)?;
    let rows = paths
        .par_iter()
        .map(|path| {
            let img = load(path)?;
            let ref_path = reference.map(|d| d.join(file_name(path))).filter(|p| p.is_file());
            if reference.is_some() && ref_path.is_none() {
                warn!("no reference for {}", file_name(path));
            }
            let ref_img = ref_path.as_deref().map(load).transpose()?;
            let values = MetricValues::compute(&img, ref_img.as_ref()).with_context(|| format!("scoring {}", path.display()))?;
            Ok(MetricRow { image: file_name(path), reference: ref_path.as_deref().map(file_name), values })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = MetricReport { rows };
    write_atomic(csv, &report.to_csv())?;
    for (name, mean) in report.aggregate() {
        println!("{name}\t{mean:.6}");
    }
    Ok(())
}

fn split(input: &Path, fraction: f64, seed: u64) -> Result<()> {
    let names: Vec<String> = inputs(input)?.iter().map(|p| file_name(p)).collect();
    let (train, holdout) = split_dataset(&names, fraction, seed)?;
    for n in &train {
        println!("train\t{n}");
    }
    for n in &holdout {
        println!("holdout\t{n}");
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("AQUAMEND_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("AQUAMEND_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train { config } => train(&config),
        Command::Enhance { model, input, output } => enhance_dir(&model, &input, &output),
        Command::Degrade { input, output, stage } => degrade_dir(&input, &output, stage),
        Command::Attention { input, output } => attention_dir(&input, &output),
        Command::Stats { input, csv } => stats_csv(&input, &csv),
        Command::Evaluate { input, reference, csv } => evaluate_csv(&input, reference.as_deref(), &csv),
        Command::Split { input, fraction, seed } => split(&input, fraction, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
