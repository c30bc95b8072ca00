//! Pipeline orchestration behind the CLI: simulate, generate labels, train,
//! track, evaluate, and the benchmark ladder. Every command writes a run
//! manifest alongside its outputs, and all parallelism draws per-unit
//! sub-seeds so the `--jobs` setting never changes a byte of output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::detection::Detection;
use crate::metrics::{evaluate, EvalCounts, EvalReport, MetricsError, DEFAULT_IOU_MIN};
use crate::motio::{self, MotioError, SequenceBundle, TrackedBox};
use crate::reid::{
    generate_labels, labels_from_ground_truth, train, EmbedError, Embedder, EmbeddingModel,
    ModelIoError, TrainConfig, TrainError,
};
use crate::synth::{generate, ScenarioConfig};
use crate::trackers::{
    annotate_identities, collect_tracked_boxes, OracleTracker, ReidConfig, ReidTracker, SortConfig,
    SortTracker, TrackerError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Motio(#[from] MotioError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelIoError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Deterministic sub-seed derivation (splitmix64 over seed ^ salt).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl Manifest {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            tool_version: VERSION.into(),
            seed: None,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

/// Manifest path for a file output: `<file>.manifest.json`.
fn manifest_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Generate a scenario and write it as a sequence directory.
pub fn simulate_cmd(config: &ScenarioConfig, out_dir: &Path) -> Result<Manifest, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let start = Instant::now();
    let bundle = generate(config);
    motio::save_sequence(out_dir, &bundle)?;

    let mut manifest = Manifest::new("simulate", serde_json::to_value(config)?);
    manifest.seed = Some(config.seed);
    manifest.outputs = ["seqinfo.txt", "det.txt", "gt.txt", "features.txt"]
        .iter()
        .map(|f| out_dir.join(f).display().to_string())
        .collect();
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// gen-labels
// ---------------------------------------------------------------------------

/// Run label generation over sequence directories and write the dataset.
pub fn gen_labels_cmd(
    inputs: &[PathBuf],
    sort_config: &SortConfig,
    min_tracklet_length: usize,
    out: &Path,
    jobs: usize,
) -> Result<Manifest, PipelineError> {
    sort_config.validate().map_err(PipelineError::Config)?;
    let start = Instant::now();
    let pool = thread_pool(jobs)?;
    let bundles: Result<Vec<SequenceBundle>, MotioError> = pool.install(|| {
        use rayon::prelude::*;
        inputs
            .par_iter()
            .map(|dir| motio::load_sequence(dir))
            .collect()
    });
    let bundles = bundles?;
    let dataset = generate_labels(&bundles, sort_config, min_tracklet_length)?;
    motio::write_labels(BufWriter::new(File::create(out)?), &dataset)?;

    let mut manifest = Manifest::new(
        "gen-labels",
        serde_json::json!({
            "sort": sort_config,
            "min_tracklet_length": min_tracklet_length,
            "classes": dataset.class_count(),
            "records": dataset.records.len(),
        }),
    );
    manifest.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
    manifest.outputs = vec![out.display().to_string()];
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_for(out))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// train-reid
// ---------------------------------------------------------------------------

/// Train the embedding model from a labels file and write the checkpoint.
/// Returns the per-epoch loss trace.
pub fn train_cmd(
    labels_path: &Path,
    config: &TrainConfig,
    model_out: &Path,
) -> Result<(Manifest, Vec<f64>), PipelineError> {
    let start = Instant::now();
    let dataset = motio::read_labels(BufReader::new(File::open(labels_path)?))?;
    let outcome = train(&dataset, config)?;
    outcome
        .model
        .save(BufWriter::new(File::create(model_out)?))?;

    let mut manifest = Manifest::new("train-reid", serde_json::to_value(config)?);
    manifest.seed = Some(config.seed);
    manifest.inputs = vec![labels_path.display().to_string()];
    manifest.outputs = vec![model_out.display().to_string()];
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_for(model_out))?;
    Ok((manifest, outcome.loss_trace))
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Sort,
    Reid,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// Embeddings from the trained model checkpoint.
    Model,
    /// Fresh random unit vectors.
    Random,
    /// Fixed seeded projection of the raw features.
    Generic,
    /// A model trained on ground-truth identity labels of this sequence.
    Supervised,
    /// Identity-revealing one-hot codes.
    Oracle,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackOptions {
    pub tracker: TrackerKind,
    pub embedder: EmbedderKind,
    pub sort: SortConfig,
    pub reid: ReidConfig,
    pub train: TrainConfig,
    /// Emit raw detection boxes instead of Kalman posteriors.
    pub raw_boxes: bool,
    /// Seed for the random and generic embedders.
    pub seed: u64,
    /// Dimension of random/generic embeddings.
    pub embed_dim: usize,
    /// IoU threshold when annotating detections with ground-truth identity.
    pub annotation_iou_min: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            tracker: TrackerKind::Sort,
            embedder: EmbedderKind::Model,
            sort: SortConfig::default(),
            reid: ReidConfig::default(),
            train: TrainConfig::default(),
            raw_boxes: false,
            seed: 0,
            embed_dim: 128,
            annotation_iou_min: DEFAULT_IOU_MIN,
        }
    }
}

fn detections_by_frame(
    detections: &[Detection],
) -> std::collections::BTreeMap<u32, Vec<Detection>> {
    let mut by_frame: std::collections::BTreeMap<u32, Vec<Detection>> = Default::default();
    for d in detections {
        by_frame.entry(d.frame).or_default().push(d.clone());
    }
    by_frame
}

/// Run the selected tracker over one sequence, in memory.
pub fn track_bundle(
    bundle: &SequenceBundle,
    model: Option<&EmbeddingModel>,
    opts: &TrackOptions,
) -> Result<Vec<TrackedBox>, PipelineError> {
    opts.sort.validate().map_err(PipelineError::Config)?;
    opts.reid.validate().map_err(PipelineError::Config)?;
    let empty: Vec<Detection> = Vec::new();
    match opts.tracker {
        TrackerKind::Sort => {
            let by_frame = detections_by_frame(&bundle.detections);
            let mut tracker = SortTracker::new(opts.sort.clone());
            for frame in 1..=bundle.frame_count {
                tracker.step(frame, by_frame.get(&frame).unwrap_or(&empty))?;
            }
            Ok(collect_tracked_boxes(&tracker.finish(), opts.raw_boxes))
        }
        TrackerKind::Oracle => {
            let gt = bundle
                .ground_truth
                .as_ref()
                .ok_or_else(|| PipelineError::Config("oracle tracker requires gt.txt".into()))?;
            let identities = annotate_identities(&bundle.detections, gt, opts.annotation_iou_min);
            let mut by_frame: std::collections::BTreeMap<u32, (Vec<Detection>, Vec<Option<u32>>)> =
                Default::default();
            for (d, id) in bundle.detections.iter().zip(identities) {
                let slot = by_frame.entry(d.frame).or_default();
                slot.0.push(d.clone());
                slot.1.push(id);
            }
            let mut tracker = OracleTracker::new(opts.sort.clone());
            for frame in 1..=bundle.frame_count {
                match by_frame.get(&frame) {
                    Some((dets, ids)) => tracker.step(frame, dets, ids)?,
                    None => tracker.step(frame, &[], &[])?,
                };
            }
            Ok(collect_tracked_boxes(&tracker.finish(), opts.raw_boxes))
        }
        TrackerKind::Reid => {
            let embedder = match opts.embedder {
                EmbedderKind::Model => {
                    let model = model.ok_or_else(|| {
                        PipelineError::Config("the model embedder requires --model".into())
                    })?;
                    Embedder::Model(model.clone())
                }
                EmbedderKind::Supervised => {
                    let labels = labels_from_ground_truth(
                        std::slice::from_ref(bundle),
                        opts.annotation_iou_min,
                        opts.train.min_tracklet_length,
                    );
                    let outcome = train(&labels, &opts.train)?;
                    Embedder::Model(outcome.model)
                }
                EmbedderKind::Random => Embedder::Random {
                    dim: opts.embed_dim,
                    seed: opts.seed,
                },
                EmbedderKind::Generic => {
                    let input_dim = bundle
                        .detections
                        .iter()
                        .find_map(|d| d.feature.as_ref().map(crate::detection::Feature::dim))
                        .ok_or_else(|| {
                            PipelineError::Config("generic embedder requires raw features".into())
                        })?;
                    Embedder::generic(input_dim, opts.embed_dim, opts.seed)
                }
                EmbedderKind::Oracle => Embedder::Oracle {
                    iou_min: opts.annotation_iou_min,
                },
            };
            let detections = embedder.apply(bundle)?;
            let by_frame = detections_by_frame(&detections);
            let mut tracker = ReidTracker::new(opts.sort.clone(), opts.reid.clone());
            for frame in 1..=bundle.frame_count {
                tracker.step(frame, by_frame.get(&frame).unwrap_or(&empty))?;
            }
            Ok(collect_tracked_boxes(&tracker.finish(), opts.raw_boxes))
        }
    }
}

/// Track one sequence directory and write a results file.
pub fn track_cmd(
    in_dir: &Path,
    model_path: Option<&Path>,
    opts: &TrackOptions,
    out: &Path,
) -> Result<Manifest, PipelineError> {
    let start = Instant::now();
    let bundle = motio::load_sequence(in_dir)?;
    let model = match model_path {
        Some(p) => Some(EmbeddingModel::load(BufReader::new(File::open(p)?))?),
        None => None,
    };
    let boxes = track_bundle(&bundle, model.as_ref(), opts)?;
    motio::write_results(BufWriter::new(File::create(out)?), &boxes)?;

    let mut manifest = Manifest::new("track", serde_json::to_value(opts)?);
    manifest.seed = Some(opts.seed);
    manifest.inputs = std::iter::once(in_dir.display().to_string())
        .chain(model_path.map(|p| p.display().to_string()))
        .collect();
    manifest.outputs = vec![out.display().to_string()];
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_for(out))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// Evaluate results files against their sequence directories.
pub fn eval_cmd(
    pairs: &[(PathBuf, PathBuf)],
    iou_min: f64,
    out: Option<&Path>,
    jobs: usize,
) -> Result<(Option<Manifest>, EvalReport), PipelineError> {
    let start = Instant::now();
    let pool = thread_pool(jobs)?;
    let sequences: Result<Vec<(String, EvalCounts)>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|(gt_dir, results)| {
                let bundle = motio::load_sequence(gt_dir)?;
                let gt = bundle.ground_truth.as_ref().ok_or_else(|| {
                    PipelineError::Config(format!("{} has no gt.txt", gt_dir.display()))
                })?;
                let preds = motio::parse_results(BufReader::new(File::open(results)?))?;
                let counts = evaluate(gt, &preds, iou_min)?;
                Ok((bundle.name.clone(), counts))
            })
            .collect()
    });
    let report = EvalReport::from_sequences(sequences?);

    let manifest = match out {
        Some(path) => {
            report.write_csv(BufWriter::new(File::create(path)?))?;
            let mut manifest = Manifest::new(
                "eval",
                serde_json::json!({ "iou_min": iou_min, "sequences": pairs.len() }),
            );
            manifest.inputs = pairs
                .iter()
                .flat_map(|(g, r)| [g.display().to_string(), r.display().to_string()])
                .collect();
            manifest.outputs = vec![path.display().to_string()];
            manifest.duration_seconds = start.elapsed().as_secs_f64();
            manifest.write(&manifest_for(path))?;
            Some(manifest)
        }
        None => None,
    };
    Ok((manifest, report))
}

// ---------------------------------------------------------------------------
// bench: the ablation ladder
// ---------------------------------------------------------------------------

pub const LADDER: [&str; 6] = ["none", "random", "generic", "ours", "supervised", "oracle"];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub preset: String,
    pub seed_count: u64,
    pub base_seed: u64,
    pub jobs: usize,
    pub sort_eval: SortConfig,
    pub sort_label: SortConfig,
    pub reid: ReidConfig,
    pub train: TrainConfig,
    pub iou_min: f64,
    pub embed_dim: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            preset: "crowded".into(),
            seed_count: 10,
            base_seed: 0,
            jobs: 1,
            sort_eval: SortConfig::default(),
            sort_label: SortConfig::label_generation(),
            reid: ReidConfig::default(),
            train: TrainConfig::default(),
            iou_min: DEFAULT_IOU_MIN,
            embed_dim: 128,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub name: &'static str,
    /// Counts summed over seeds; ratios computed from the sums.
    pub counts: EvalCounts,
    pub per_seed_idf1: Vec<f64>,
    pub per_seed_mota: Vec<f64>,
    pub per_seed_idsw: Vec<u64>,
}

impl BenchRow {
    pub fn idf1_mean_stderr(&self) -> (f64, f64) {
        mean_stderr(&self.per_seed_idf1)
    }

    pub fn mota_mean_stderr(&self) -> (f64, f64) {
        mean_stderr(&self.per_seed_mota)
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub preset: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, name: &str) -> &BenchRow {
        self.rows
            .iter()
            .find(|r| r.name == name)
            .expect("ladder row")
    }

    /// Comparison table: aggregate MOTA/IDF1 in points, per-seed IDF1
    /// dispersion, and summed error counts.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "preset {} over {} seeds\n{:<12} {:>7} {:>7} {:>16} {:>7} {:>7} {:>7}\n",
            self.preset,
            self.seeds.len(),
            "reid",
            "MOTA",
            "IDF1",
            "IDF1 mean+-se",
            "FP",
            "FN",
            "IDSW"
        ));
        for row in &self.rows {
            let (mean, se) = row.idf1_mean_stderr();
            out.push_str(&format!(
                "{:<12} {:>7.1} {:>7.1} {:>9.1} ± {:>4.1} {:>7} {:>7} {:>7}\n",
                row.name,
                100.0 * row.counts.mota(),
                100.0 * row.counts.idf1(),
                100.0 * mean,
                100.0 * se,
                row.counts.false_positives,
                row.counts.false_negatives,
                row.counts.id_switches,
            ));
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<(), PipelineError> {
        writeln!(
            w,
            "reid,mota,idf1,idf1_mean,idf1_stderr,fp,fn,idsw,gt,pred,idtp"
        )?;
        for row in &self.rows {
            let (mean, se) = row.idf1_mean_stderr();
            writeln!(
                w,
                "{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
                row.name,
                row.counts.mota(),
                row.counts.idf1(),
                mean,
                se,
                row.counts.false_positives,
                row.counts.false_negatives,
                row.counts.id_switches,
                row.counts.gt_count,
                row.counts.pred_count,
                row.counts.idtp,
            )?;
        }
        Ok(())
    }
}

/// Ladder results for one seeded scenario, in [`LADDER`] order.
fn bench_one_seed(config: &BenchConfig, seed: u64) -> Result<[EvalCounts; 6], PipelineError> {
    let scenario = ScenarioConfig::preset(&config.preset, seed)
        .ok_or_else(|| PipelineError::Config(format!("unknown preset {:?}", config.preset)))?;
    let bundle = generate(&scenario);
    let gt = bundle
        .ground_truth
        .clone()
        .expect("synthetic scenarios carry gt");

    // Tracklet labels from the appearance-free tracker, then the trained
    // embedding model.
    let labels = generate_labels(
        std::slice::from_ref(&bundle),
        &config.sort_label,
        config.train.min_tracklet_length,
    )?;
    let mut ours_train = config.train.clone();
    ours_train.seed = derive_seed(seed, 0x6F75_7273);
    let ours_model = train(&labels, &ours_train)?.model;

    // Supervised counterpart: same architecture, ground-truth labels.
    let sup_labels = labels_from_ground_truth(
        std::slice::from_ref(&bundle),
        config.iou_min,
        config.train.min_tracklet_length,
    );
    let mut sup_train = config.train.clone();
    sup_train.seed = derive_seed(seed, 0x7375_7065);
    let sup_model = train(&sup_labels, &sup_train)?.model;

    let run = |opts: &TrackOptions,
               model: Option<&EmbeddingModel>|
     -> Result<EvalCounts, PipelineError> {
        let boxes = track_bundle(&bundle, model, opts)?;
        Ok(evaluate(&gt, &boxes, config.iou_min)?)
    };
    let base = TrackOptions {
        sort: config.sort_eval.clone(),
        reid: config.reid.clone(),
        train: config.train.clone(),
        embed_dim: config.embed_dim,
        annotation_iou_min: config.iou_min,
        ..TrackOptions::default()
    };

    let none = run(
        &TrackOptions {
            tracker: TrackerKind::Sort,
            ..base.clone()
        },
        None,
    )?;
    let random = run(
        &TrackOptions {
            tracker: TrackerKind::Reid,
            embedder: EmbedderKind::Random,
            seed: derive_seed(seed, 0x726E_6400),
            ..base.clone()
        },
        None,
    )?;
    let generic = run(
        &TrackOptions {
            tracker: TrackerKind::Reid,
            embedder: EmbedderKind::Generic,
            seed: config.base_seed, // one fixed projection across all

            ..base.clone()
        },
        None,
    )?;
    let ours = run(
        &TrackOptions {
            tracker: TrackerKind::Reid,
            embedder: EmbedderKind::Model,
            ..base.clone()
        },
        Some(&ours_model),
    )?;
    let supervised = run(
        &TrackOptions {
            tracker: TrackerKind::Reid,
            embedder: EmbedderKind::Model,
            ..base.clone()
        },
        Some(&sup_model),
    )?;
    let oracle = run(
        &TrackOptions {
            tracker: TrackerKind::Oracle,
            ..base.clone()
        },
        None,
    )?;

    Ok([none, random, generic, ours, supervised, oracle])
}

/// Run the full ablation ladder over `seed_count` scenarios.
pub fn bench(config: &BenchConfig) -> Result<BenchReport, PipelineError> {
    let seeds: Vec<u64> = (0..config.seed_count)
        .map(|i| config.base_seed + i)
        .collect();
    let pool = thread_pool(config.jobs)?;
    let per_seed: Result<Vec<[EvalCounts; 6]>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&s| bench_one_seed(config, s))
            .collect()
    });
    let per_seed = per_seed?;

    let rows = LADDER
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let mut counts = EvalCounts::default();
            let mut idf1 = Vec::new();
            let mut mota = Vec::new();
            let mut idsw = Vec::new();
            for result in &per_seed {
                counts.accumulate(&result[i]);
                idf1.push(result[i].idf1());
                mota.push(result[i].mota());
                idsw.push(result[i].id_switches);
            }
            BenchRow {
                name,
                counts,
                per_seed_idf1: idf1,
                per_seed_mota: mota,
                per_seed_idsw: idsw,
            }
        })
        .collect();
    Ok(BenchReport {
        preset: config.preset.clone(),
        seeds,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Full file-based pipeline (simulate -> gen-labels -> train -> track -> eval)
// ---------------------------------------------------------------------------

/// Run the whole pipeline through the on-disk formats, one sequence
/// directory per seed. Returns the data files written (manifests excluded),
/// in a fixed order suitable for hashing.
pub fn full_pipeline(
    preset: &str,
    seeds: &[u64],
    train_config: &TrainConfig,
    out_root: &Path,
    jobs: usize,
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(out_root)?;
    let pool = thread_pool(jobs)?;
    let mut outputs = Vec::new();

    // simulate
    let seq_dirs: Vec<PathBuf> = seeds
        .iter()
        .map(|&s| out_root.join(format!("{preset}-s{s}")))
        .collect();
    let sims: Result<Vec<()>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .zip(&seq_dirs)
            .map(|(&s, dir)| {
                let config = ScenarioConfig::preset(preset, s)
                    .ok_or_else(|| PipelineError::Config(format!("unknown preset {preset:?}")))?;
                simulate_cmd(&config, dir)?;
                Ok(())
            })
            .collect()
    });
    sims?;
    for dir in &seq_dirs {
        for f in ["seqinfo.txt", "det.txt", "gt.txt", "features.txt"] {
            outputs.push(dir.join(f));
        }
    }

    // gen-labels
    let labels_path = out_root.join("labels.csv");
    gen_labels_cmd(
        &seq_dirs,
        &SortConfig::label_generation(),
        train_config.min_tracklet_length,
        &labels_path,
        jobs,
    )?;
    outputs.push(labels_path.clone());

    // train-reid
    let model_path = out_root.join("model.bin");
    train_cmd(&labels_path, train_config, &model_path)?;
    outputs.push(model_path.clone());

    // track (reid tracker with the trained model)
    let results: Result<Vec<PathBuf>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        seq_dirs
            .par_iter()
            .map(|dir| {
                let name = dir
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let out = out_root.join(format!("results-{name}.txt"));
                let opts = TrackOptions {
                    tracker: TrackerKind::Reid,
                    embedder: EmbedderKind::Model,
                    train: train_config.clone(),
                    ..TrackOptions::default()
                };
                track_cmd(dir, Some(&model_path), &opts, &out)?;
                Ok(out)
            })
            .collect()
    });
    let results = results?;
    outputs.extend(results.iter().cloned());

    // eval
    let report_path = out_root.join("report.csv");
    let pairs: Vec<(PathBuf, PathBuf)> = seq_dirs
        .iter()
        .cloned()
        .zip(results.iter().cloned())
        .collect();
    eval_cmd(&pairs, DEFAULT_IOU_MIN, Some(&report_path), jobs)?;
    outputs.push(report_path);

    Ok(outputs)
}
