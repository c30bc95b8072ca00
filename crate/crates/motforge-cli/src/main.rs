//! Command-line surface of the tracking pipeline.
//!
//! Subcommands mirror the pipeline stages: `simulate`, `gen-labels`,
//! `train-reid`, `track`, `eval`, and `bench`. Configuration precedence is
//! flags over config file over built-in defaults; the merged snapshot lands
//! in each run's manifest.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use motforge::pipeline::{self, bench, BenchConfig, EmbedderKind, TrackOptions, TrackerKind};
use motforge::reid::TrainConfig;
use motforge::synth::ScenarioConfig;
use motforge::trackers::{ReidConfig, SortConfig};

#[derive(Parser)]
#[command(
    name = "motforge",
    version,
    about = "Unsupervised multi-object tracking pipeline"
)]
struct Cli {
    /// Worker threads for sequence-parallel stages.
    #[arg(long, global = true, env = "MOTFORGE_JOBS")]
    jobs: Option<usize>,
    /// JSON config file with optional `scenario`, `sort`, `reid`, and
    /// `train` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<ScenarioConfig>,
    sort: Option<SortConfig>,
    reid: Option<ReidConfig>,
    train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TrackerArg {
    Sort,
    Reid,
    Oracle,
}

impl From<TrackerArg> for TrackerKind {
    fn from(value: TrackerArg) -> Self {
        match value {
            TrackerArg::Sort => TrackerKind::Sort,
            TrackerArg::Reid => TrackerKind::Reid,
            TrackerArg::Oracle => TrackerKind::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbedderArg {
    Model,
    Random,
    Generic,
    Supervised,
    Oracle,
}

impl From<EmbedderArg> for EmbedderKind {
    fn from(value: EmbedderArg) -> Self {
        match value {
            EmbedderArg::Model => EmbedderKind::Model,
            EmbedderArg::Random => EmbedderKind::Random,
            EmbedderArg::Generic => EmbedderKind::Generic,
            EmbedderArg::Supervised => EmbedderKind::Supervised,
            EmbedderArg::Oracle => EmbedderKind::Oracle,
        }
    }
}

/// Lifecycle flags shared by the tracking-style subcommands.
#[derive(Debug, Args)]
struct SortFlags {
    /// Frames a track survives without a match.
    #[arg(long)]
    max_age: Option<u32>,
    /// Matches required to confirm a track.
    #[arg(long)]
    min_hits: Option<u32>,
    /// Detections below this confidence never spawn tracks.
    #[arg(long)]
    confidence_min: Option<f64>,
    /// IoU cost threshold (1 - minimum IoU).
    #[arg(long)]
    iou_infeasible_above: Option<f64>,
}

impl SortFlags {
    fn apply(&self, mut config: SortConfig) -> SortConfig {
        if let Some(v) = self.max_age {
            config.max_age = v;
        }
        if let Some(v) = self.min_hits {
            config.min_hits = v;
        }
        if let Some(v) = self.confidence_min {
            config.confidence_min = v;
        }
        if let Some(v) = self.iou_infeasible_above {
            config.iou_infeasible_above = v;
        }
        config
    }
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    min_tracklet_length: Option<usize>,
    /// Training seed (init and batch schedule).
    #[arg(long)]
    train_seed: Option<u64>,
}

impl TrainFlags {
    fn apply(&self, mut config: TrainConfig) -> TrainConfig {
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.momentum {
            config.momentum = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            config.weight_decay = v;
        }
        if let Some(v) = self.hidden_dim {
            config.hidden_dim = v;
        }
        if let Some(v) = self.min_tracklet_length {
            config.min_tracklet_length = v;
        }
        if let Some(v) = self.train_seed {
            config.seed = v;
        }
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence directory.
    Simulate {
        /// Scenario preset: easy, crowded, or noiseless.
        #[arg(long, default_value = "easy")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the label factory over sequence directories.
    GenLabels {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_tracklet_length: Option<usize>,
        #[command(flatten)]
        sort: SortFlags,
    },
    /// Train the embedding model from a labels file.
    TrainReid {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Track one sequence directory and write a results file.
    Track {
        #[arg(long, value_enum)]
        tracker: TrackerArg,
        #[arg(long, value_enum, default_value = "model")]
        embedder: EmbedderArg,
        /// Model checkpoint for the model embedder.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Emit raw detection boxes instead of Kalman posteriors.
        #[arg(long)]
        raw_boxes: bool,
        /// Seed for the random and generic embedders.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimension of random/generic embeddings.
        #[arg(long, default_value_t = 128)]
        embed_dim: usize,
        #[arg(long)]
        appearance_infeasible_above: Option<f64>,
        #[arg(long)]
        gallery_budget: Option<usize>,
        #[arg(long)]
        gate_threshold: Option<f64>,
        #[arg(long)]
        cascade_depth: Option<u32>,
        #[command(flatten)]
        sort: SortFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score results files against sequence ground truth.
    Eval {
        /// Sequence directories containing gt.txt, one per results file.
        #[arg(long = "gt", required = true, num_args = 1..)]
        gt: Vec<PathBuf>,
        #[arg(long = "results", required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        iou_min: f64,
        /// Report CSV path; the table always prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ReID ablation ladder over seeded scenarios.
    Bench {
        #[arg(long, default_value = "crowded")]
        preset: String,
        /// Number of seeded scenarios.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Ladder CSV path; the table always prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let reader = BufReader::new(
                File::open(p).with_context(|| format!("cannot open config {}", p.display()))?,
            );
            serde_json::from_reader(reader)
                .with_context(|| format!("cannot parse config {}", p.display()))
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = load_file_config(&cli.config)?;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    match cli.command {
        Command::Simulate { preset, seed, out } => {
            let config = match file.scenario {
                Some(mut s) => {
                    s.seed = seed;
                    s
                }
                None => ScenarioConfig::preset(&preset, seed)
                    .with_context(|| format!("unknown preset {preset:?}"))?,
            };
            let manifest = pipeline::simulate_cmd(&config, &out)?;
            eprintln!(
                "wrote {} ({:.2}s)",
                out.display(),
                manifest.duration_seconds
            );
        }
        Command::GenLabels {
            inputs,
            out,
            min_tracklet_length,
            sort,
        } => {
            let sort_config = sort.apply(file.sort.unwrap_or_else(SortConfig::label_generation));
            let train = file.train.unwrap_or_default();
            let min_len = min_tracklet_length.unwrap_or(train.min_tracklet_length);
            let manifest = pipeline::gen_labels_cmd(&inputs, &sort_config, min_len, &out, jobs)?;
            eprintln!(
                "wrote {} ({} classes, {:.2}s)",
                out.display(),
                manifest.config["classes"],
                manifest.duration_seconds
            );
        }
        Command::TrainReid { labels, out, train } => {
            let config = train.apply(file.train.unwrap_or_default());
            let (manifest, trace) = pipeline::train_cmd(&labels, &config, &out)?;
            for (epoch, loss) in trace.iter().enumerate() {
                println!("epoch {:>3}  loss {:.6}", epoch + 1, loss);
            }
            eprintln!(
                "wrote {} ({:.2}s)",
                out.display(),
                manifest.duration_seconds
            );
        }
        Command::Track {
            tracker,
            embedder,
            model,
            input,
            out,
            raw_boxes,
            seed,
            embed_dim,
            appearance_infeasible_above,
            gallery_budget,
            gate_threshold,
            cascade_depth,
            sort,
            train,
        } => {
            let mut reid = file.reid.unwrap_or_default();
            if let Some(v) = appearance_infeasible_above {
                reid.appearance_infeasible_above = v;
            }
            if let Some(v) = gallery_budget {
                reid.gallery_budget = v;
            }
            if let Some(v) = gate_threshold {
                reid.gate_threshold = v;
            }
            if let Some(v) = cascade_depth {
                reid.cascade_depth = Some(v);
            }
            let opts = TrackOptions {
                tracker: tracker.into(),
                embedder: embedder.into(),
                sort: sort.apply(file.sort.unwrap_or_default()),
                reid,
                train: train.apply(file.train.unwrap_or_default()),
                raw_boxes,
                seed,
                embed_dim,
                ..TrackOptions::default()
            };
            let manifest = pipeline::track_cmd(&input, model.as_deref(), &opts, &out)?;
            eprintln!(
                "wrote {} ({:.2}s)",
                out.display(),
                manifest.duration_seconds
            );
        }
        Command::Eval {
            gt,
            results,
            iou_min,
            out,
        } => {
            if gt.len() != results.len() {
                bail!(
                    "--gt and --results must pair up ({} vs {})",
                    gt.len(),
                    results.len()
                );
            }
            let pairs: Vec<(PathBuf, PathBuf)> = gt.into_iter().zip(results).collect();
            let (_, report) = pipeline::eval_cmd(&pairs, iou_min, out.as_deref(), jobs)?;
            print!("{}", report.render_table());
        }
        Command::Bench {
            preset,
            seeds,
            base_seed,
            out,
        } => {
            let config = BenchConfig {
                preset,
                seed_count: seeds,
                base_seed,
                jobs,
                sort_eval: file.sort.clone().unwrap_or_default(),
                reid: file.reid.unwrap_or_default(),
                train: file.train.unwrap_or_default(),
                ..BenchConfig::default()
            };
            let report = bench(&config)?;
            print!("{}", report.render_table());
            if let Some(path) = out {
                report.write_csv(std::io::BufWriter::new(File::create(&path)?))?;
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
