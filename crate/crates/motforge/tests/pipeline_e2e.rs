//! End-to-end pipeline behavior through the on-disk formats.

use motforge::metrics::DEFAULT_IOU_MIN;
use motforge::pipeline::{
    bench, eval_cmd, gen_labels_cmd, simulate_cmd, track_cmd, train_cmd, BenchConfig, EmbedderKind,
    PipelineError, TrackOptions, TrackerKind, LADDER,
};
use motforge::reid::TrainConfig;
use motforge::synth::ScenarioConfig;
use motforge::trackers::SortConfig;

#[test]
fn noiseless_sequence_tracks_perfectly_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate_cmd(&ScenarioConfig::noiseless(4), &seq).unwrap();

    let results = dir.path().join("results.txt");
    let opts = TrackOptions {
        tracker: TrackerKind::Sort,
        ..TrackOptions::default()
    };
    track_cmd(&seq, None, &opts, &results).unwrap();

    let report_path = dir.path().join("report.csv");
    let (_, report) = eval_cmd(
        &[(seq.clone(), results.clone())],
        DEFAULT_IOU_MIN,
        Some(&report_path),
        2,
    )
    .unwrap();
    assert_eq!(report.overall.mota(), 1.0, "{:?}", report.overall);
    assert_eq!(report.overall.idf1(), 1.0);

    // Every output carries a manifest.
    assert!(seq.join("manifest.json").exists());
    assert!(dir.path().join("results.txt.manifest.json").exists());
    assert!(dir.path().join("report.csv.manifest.json").exists());
}

#[test]
fn labels_train_track_chain_beats_sort_on_crowded_files() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate_cmd(&ScenarioConfig::crowded(5), &seq).unwrap();

    let labels = dir.path().join("labels.csv");
    gen_labels_cmd(
        std::slice::from_ref(&seq),
        &SortConfig::label_generation(),
        2,
        &labels,
        2,
    )
    .unwrap();

    let model = dir.path().join("model.bin");
    let train = TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    };
    let (_, trace) = train_cmd(&labels, &train, &model).unwrap();
    assert_eq!(trace.len(), 15);
    assert!(trace.iter().all(|l| l.is_finite()));

    let reid_results = dir.path().join("reid.txt");
    let opts = TrackOptions {
        tracker: TrackerKind::Reid,
        embedder: EmbedderKind::Model,
        ..TrackOptions::default()
    };
    track_cmd(&seq, Some(&model), &opts, &reid_results).unwrap();

    let sort_results = dir.path().join("sort.txt");
    let sort_opts = TrackOptions {
        tracker: TrackerKind::Sort,
        ..TrackOptions::default()
    };
    track_cmd(&seq, None, &sort_opts, &sort_results).unwrap();

    let (_, reid_report) =
        eval_cmd(&[(seq.clone(), reid_results)], DEFAULT_IOU_MIN, None, 1).unwrap();
    let (_, sort_report) =
        eval_cmd(&[(seq.clone(), sort_results)], DEFAULT_IOU_MIN, None, 1).unwrap();
    assert!(
        reid_report.overall.idf1() > sort_report.overall.idf1(),
        "reid {} vs sort {}",
        reid_report.overall.idf1(),
        sort_report.overall.idf1()
    );
}

#[test]
fn bench_rows_come_in_fixed_ladder_order() {
    let config = BenchConfig {
        preset: "easy".into(),
        seed_count: 1,
        jobs: 2,
        train: TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    };
    let report = bench(&config).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.name).collect();
    assert_eq!(names, LADDER.to_vec());
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 7, "header plus six ladder rows");
}

#[test]
fn oracle_features_track_noiseless_scenes_without_switches() {
    use motforge::metrics::evaluate;
    use motforge::pipeline::track_bundle;
    use motforge::synth::generate;

    for seed in [0u64, 1, 2] {
        let bundle = generate(&ScenarioConfig::noiseless(seed));
        let gt = bundle.ground_truth.clone().unwrap();
        let opts = TrackOptions {
            tracker: TrackerKind::Reid,
            embedder: EmbedderKind::Oracle,
            ..TrackOptions::default()
        };
        let boxes = track_bundle(&bundle, None, &opts).unwrap();
        let counts = evaluate(&gt, &boxes, DEFAULT_IOU_MIN).unwrap();
        assert_eq!(counts.id_switches, 0, "seed {seed}: {counts:?}");
    }
}

#[test]
fn supervised_embeddings_cluster_by_identity() {
    use motforge::reid::{labels_from_ground_truth, train, TrainConfig};
    use motforge::synth::generate;

    let bundle = generate(&ScenarioConfig::crowded(3));
    let labels = labels_from_ground_truth(std::slice::from_ref(&bundle), 0.5, 2);
    let config = TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    };
    let model = train(&labels, &config).unwrap().model;

    let mut within = (0.0, 0u64);
    let mut between = (0.0, 0u64);
    let sample: Vec<_> = labels.records.iter().step_by(7).collect();
    for (i, a) in sample.iter().enumerate() {
        let ea = model.embed(a.feature.as_ref().unwrap().values());
        for b in sample.iter().skip(i + 1) {
            let eb = model.embed(b.feature.as_ref().unwrap().values());
            let bucket = if a.label == b.label {
                &mut within
            } else {
                &mut between
            };
            bucket.0 += ea.dot(&eb);
            bucket.1 += 1;
        }
    }
    let within_mean = within.0 / within.1 as f64;
    let between_mean = between.0 / between.1 as f64;
    assert!(
        within_mean > between_mean,
        "within {within_mean} vs between {between_mean}"
    );
}

#[test]
fn model_embedder_without_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate_cmd(&ScenarioConfig::easy(1), &seq).unwrap();
    let opts = TrackOptions {
        tracker: TrackerKind::Reid,
        embedder: EmbedderKind::Model,
        ..TrackOptions::default()
    };
    let err = track_cmd(&seq, None, &opts, &dir.path().join("out.txt")).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
}

#[test]
fn oracle_tracker_requires_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    simulate_cmd(&ScenarioConfig::easy(2), &seq).unwrap();
    std::fs::remove_file(seq.join("gt.txt")).unwrap();
    let opts = TrackOptions {
        tracker: TrackerKind::Oracle,
        ..TrackOptions::default()
    };
    let err = track_cmd(&seq, None, &opts, &dir.path().join("out.txt")).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
}

#[test]
fn missing_sequence_directory_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let opts = TrackOptions::default();
    assert!(track_cmd(&missing, None, &opts, &dir.path().join("out.txt")).is_err());
}
