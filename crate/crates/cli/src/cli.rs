//! Argument definitions and dispatch.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use strokeseg::idm::FeatureKind;

use crate::manifest::{mismatched_outputs, replay_manifest_path, strip_manifest_flag, FileDigest, Manifest, Run};
use crate::{cmd_data, cmd_seg, cmd_vae};

#[derive(Debug, Parser)]
#[command(name = "strokeseg", version, about = "Stroke-level sketch autoencoder and stroke segmentation experiments")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Where to write the run manifest (default depends on the command).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate procedural labeled sketches.
    Synth(SynthArgs),
    /// Normalize, resample, simplify and filter sketches.
    Preprocess(PreprocessArgs),
    /// Train the stroke autoencoder.
    TrainVae(TrainVaeArgs),
    /// Render reconstructions at several temperatures.
    Reconstruct(ReconstructArgs),
    /// Train a stroke segmenter on annotated sketches.
    TrainSeg(TrainSegArgs),
    /// Cross-validate segmenters, or score a trained one.
    EvalSeg(EvalSegArgs),
    /// Label strokes with a trained segmenter.
    Segment(SegmentArgs),
    /// Write per-stroke feature vectors.
    Features(FeaturesArgs),
    /// Render sketches to SVG, colored by label.
    Render(RenderArgs),
    /// Re-run a command from its manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "chair")]
    pub category: String,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Simplification tolerance in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub epsilon: f64,
    /// Minimum stroke arc length in pixels.
    #[arg(long, default_value_t = 15.0)]
    pub min_len: f64,
    /// Resampling distance in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
}

#[derive(Debug, Args)]
pub struct TrainVaeArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Epochs to run in this invocation.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// JSON file or key=value override; repeatable.
    #[arg(long)]
    pub config: Vec<String>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    pub sketches: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated sampling temperatures in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.5,1.0")]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Only the first N sketches.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Encoder checkpoint path or name, needed for the nn feature.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Keep only sketches of this category.
    #[arg(long)]
    pub category: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainSegArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "nn")]
    pub feature: FeatureKind,
    #[command(flatten)]
    pub source: FeatureArgs,
    #[arg(long)]
    pub config: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalSegArgs {
    pub data: PathBuf,
    /// Comma-separated feature variants.
    #[arg(long, value_delimiter = ',', default_value = "nn")]
    pub feature: Vec<FeatureKind>,
    #[command(flatten)]
    pub source: FeatureArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Comma-separated caps on training sketches per fold.
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Vec<usize>,
    #[arg(long)]
    pub config: Vec<String>,
    /// Score this trained segmenter on the data instead of cross-validating.
    #[arg(long)]
    pub segmenter: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub segmenter: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "idm")]
    pub feature: FeatureKind,
    #[command(flatten)]
    pub source: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Render only the sketch at this position.
    #[arg(long)]
    pub index: Option<usize>,
    /// Draw every stroke in one color even when labeled.
    #[arg(long)]
    pub monochrome: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Preprocess(_) => "preprocess",
            Command::TrainVae(_) => "train-vae",
            Command::Reconstruct(_) => "reconstruct",
            Command::TrainSeg(_) => "train-seg",
            Command::EvalSeg(_) => "eval-seg",
            Command::Segment(_) => "segment",
            Command::Features(_) => "features",
            Command::Render(_) => "render",
            Command::Replay(_) => "replay",
        }
    }

    fn default_manifest(&self) -> Option<PathBuf> {
        Some(match self {
            Command::Synth(a) => sidecar(&a.out),
            Command::Preprocess(a) => sidecar(&a.out),
            Command::TrainVae(a) => a.out_dir.join("manifest.json"),
            Command::Reconstruct(a) => a.out_dir.join("manifest.json"),
            Command::TrainSeg(a) => sidecar(&a.out),
            Command::EvalSeg(a) => sidecar(&a.out),
            Command::Segment(a) => sidecar(&a.out),
            Command::Features(a) => sidecar(&a.out),
            Command::Render(a) => a.out_dir.join("manifest.json"),
            Command::Replay(_) => return None,
        })
    }
}

/// Runs `cli`; `argv` (without the program name) is recorded in the manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Replay(a) = &cli.command {
        return replay(&a.manifest);
    }
    let manifest_path = cli.manifest.clone().or_else(|| cli.command.default_manifest()).expect("non-replay command");
    let mut run = Run::new(cli.command.name(), argv, cli.seed);
    match &cli.command {
        Command::Synth(a) => cmd_data::synth(a, &mut run)?,
        Command::Preprocess(a) => cmd_data::preprocess(a, &mut run)?,
        Command::Render(a) => cmd_data::render(a, &mut run)?,
        Command::TrainVae(a) => cmd_vae::train_vae(a, &mut run)?,
        Command::Reconstruct(a) => cmd_vae::reconstruct(a, &mut run)?,
        Command::TrainSeg(a) => cmd_seg::train_seg(a, &mut run)?,
        Command::EvalSeg(a) => cmd_seg::eval_seg(a, &mut run)?,
        Command::Segment(a) => cmd_seg::segment(a, &mut run)?,
        Command::Features(a) => cmd_seg::features(a, &mut run)?,
        Command::Replay(_) => unreachable!(),
    }
    let m = run.finish(&manifest_path)?;
    eprintln!("wrote {} output(s); manifest {}", m.outputs.len(), manifest_path.display());
    Ok(())
}

fn replay(path: &Path) -> Result<()> {
    let recorded = Manifest::load(path)?;
    let prev_dir = std::env::current_dir()?;
    std::env::set_current_dir(&recorded.cwd)
        .with_context(|| format!("entering recorded working directory {}", recorded.cwd.display()))?;
    let result = (|| -> Result<Vec<String>> {
        for i in &recorded.inputs {
            let now = FileDigest::of(&i.path)?;
            if now.sha256 != i.sha256 {
                bail!("input {} changed since the recorded run", i.path.display());
            }
        }
        let out_manifest = replay_manifest_path(&prev_dir.join(path));
        let mut argv = strip_manifest_flag(&recorded.argv);
        argv.push("--manifest".into());
        argv.push(out_manifest.to_string_lossy().into_owned());
        let cli = Cli::try_parse_from(std::iter::once("strokeseg".to_string()).chain(argv.iter().cloned()))
            .context("recorded arguments no longer parse")?;
        if matches!(cli.command, Command::Replay(_)) {
            bail!("refusing to replay a replay");
        }
        run(cli, argv)?;
        Ok(mismatched_outputs(&recorded, &Manifest::load(&out_manifest)?))
    })();
    std::env::set_current_dir(prev_dir)?;
    let bad = result?;
    if !bad.is_empty() {
        bail!("replay differs from the recorded run:\n  {}", bad.join("\n  "));
    }
    println!("replay reproduced all {} output(s) byte for byte", recorded.outputs.len());
    Ok(())
}
