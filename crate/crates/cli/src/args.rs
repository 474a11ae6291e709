use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uqseg_core::io::Normalization;
use uqseg_core::reject::validate_fractions;
use uqseg_core::Metric;

#[derive(Debug, Parser)]
#[command(name = "uqseg", version, about = "Segmentation uncertainty scoring and rejection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute image-level uncertainty scores for every image in a manifest.
    Metrics(MetricsArgs),
    /// Split a manifest into retained and rejected images by uncertainty.
    Filter(FilterArgs),
    /// Mean Dice of retained images against retained fraction.
    Curve(CurveArgs),
    /// Test-time augmentation: emit augmented inputs, collect predictions.
    #[command(subcommand)]
    Tta(TtaCommand),
    /// Write a synthetic cohort (manifest, stacks and masks).
    Synth(SynthArgs),
    /// Render the uncertainty maps of one stack as PGM images.
    Render(RenderArgs),
}

#[derive(Debug, Subcommand)]
pub enum TtaCommand {
    /// Write augmented copies of each input image plus a transform sidecar.
    Emit(TtaEmitArgs),
    /// Inverse-align predictions on augmented inputs into sample stacks.
    Collect(TtaCollectArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MetricSelection {
    /// Metrics to score: variance, entropy, mutual_information, atlas
    /// (one variant per --thresholds value) or atlas@<h>.
    #[arg(long, value_delimiter = ',', default_value = "variance,entropy,mutual_information,atlas")]
    pub metrics: Vec<String>,

    /// Atlas thresholds used when `atlas` is selected.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9", value_parser = parse_unit)]
    pub thresholds: Vec<f64>,
}

impl MetricSelection {
    pub fn resolve(&self) -> anyhow::Result<Vec<Metric>> {
        let mut out: Vec<Metric> = Vec::new();
        for name in &self.metrics {
            let expanded = match name.trim() {
                "atlas" => self.thresholds.iter().map(|&threshold| Metric::Atlas { threshold }).collect(),
                other => vec![other.parse::<Metric>()?],
            };
            for metric in expanded {
                if !out.contains(&metric) {
                    out.push(metric);
                }
            }
        }
        anyhow::ensure!(!out.is_empty(), "select at least one metric");
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Workers {
    /// Worker threads (0 = one per core). Output does not depend on this.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderScale {
    /// Scale each map by its metric's maximum (0.25 variance, ln 2 entropy/MI).
    Fixed,
    /// Stretch each map's own range to 0..255.
    PerImage,
}

impl RenderScale {
    pub fn normalization(self, metric: Metric) -> Normalization {
        match self {
            RenderScale::Fixed => Normalization::FixedRange {
                max: metric.theoretical_max(),
            },
            RenderScale::PerImage => Normalization::PerImage,
        }
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV with header image_id,stack_path,reference_seg_path,gt_path.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; receives scores.csv (and maps/ with --render).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub selection: MetricSelection,
    /// Also write a PGM per image and pixel metric.
    #[arg(long)]
    pub render: bool,
    #[arg(long, value_enum, default_value_t = RenderScale::Fixed)]
    pub scale: RenderScale,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; receives retained.csv and rejected.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of images to reject, most uncertain first.
    #[arg(long, value_parser = parse_unit)]
    pub fraction: f64,
    /// Metric used for ranking.
    #[arg(long, default_value = "variance")]
    pub metric: String,
    /// Reuse a scores.csv from `uqseg metrics` instead of recomputing.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; receives curve.csv, summary.csv and summary.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub selection: MetricSelection,
    /// Retained fractions, ascending and ending at 1.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0", value_parser = parse_unit)]
    pub fractions: Vec<f64>,
    /// Reference Dice to show as a baseline column.
    #[arg(long)]
    pub baseline: Option<f64>,
    /// Reuse a scores.csv from `uqseg metrics` instead of recomputing.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

impl CurveArgs {
    pub fn checked_fractions(&self) -> anyhow::Result<Vec<f64>> {
        validate_fractions(&self.fractions)?;
        Ok(self.fractions.clone())
    }
}

#[derive(Debug, Args)]
pub struct TtaEmitArgs {
    /// CSV with header image_id,image_path (images in the UQSS layout, T = 1).
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Augmented copies per image, the first being the identity.
    #[arg(long, default_value_t = uqseg_core::tta::DEFAULT_SAMPLES as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rotations are drawn uniformly from [-max, max] degrees.
    #[arg(long, default_value_t = 20.0)]
    pub max_rotation: f64,
    /// Gaussian noise sigma as a fraction of each image's intensity range.
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: f64,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct TtaCollectArgs {
    /// Directory written by `tta emit` (sidecars are read from here).
    #[arg(long)]
    pub emitted: PathBuf,
    /// Directory holding `<image_id>_aug<k>.uqs` predictions (T = 1).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output directory for `<image_id>.uqs` stacks.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of images (at least 2).
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    /// Severity range `lo,hi` within [0, 1]; severities are evenly spaced.
    #[arg(long, default_value = "0,0.9", value_parser = parse_range)]
    pub severity_range: (f64, f64),
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Image height and width in pixels.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(16..))]
    pub size: u64,
    /// Samples per stack.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Stack file (UQSS).
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pixel metrics to render; the atlas map is always written.
    #[arg(long, value_delimiter = ',', default_value = "variance,entropy,mutual_information")]
    pub metrics: Vec<String>,
    #[arg(long, value_enum, default_value_t = RenderScale::Fixed)]
    pub scale: RenderScale,
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let (lo, hi) = (parse_unit(lo)?, parse_unit(hi)?);
    if lo > hi {
        return Err(format!("lower bound {lo} exceeds upper bound {hi}"));
    }
    Ok((lo, hi))
}
