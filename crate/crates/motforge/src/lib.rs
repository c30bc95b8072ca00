//! Unsupervised multi-object tracking toolkit.
//!
//! The pipeline, end to end:
//!
//! 1. [`synth`] generates deterministic synthetic sequences (ground truth,
//!    noisy detections, appearance features) in MOT Challenge file formats.
//! 2. [`trackers::SortTracker`] runs appearance-free Kalman + Hungarian
//!    tracking over unlabeled detections.
//! 3. [`reid::generate_labels`] turns the resulting tracklets into a
//!    classification dataset (one class per tracklet).
//! 4. [`reid::train`] fits a small embedding network on those labels with
//!    softmax cross-entropy; the hidden activation is the ReID descriptor.
//! 5. [`trackers::ReidTracker`] consumes the learned embeddings through a
//!    gated matching cascade with an IoU fallback.
//! 6. [`metrics`] scores any tracker output with CLEAR-MOT and identity
//!    metrics (MOTA, IDF1, IDP, IDR, FP, FN, IDSW).
//!
//! [`pipeline`] wires the stages together behind the CLI and the benchmark
//! ladder (no-ReID / random / generic / trained / supervised / oracle).

pub mod assign;
pub mod bbox;
pub mod detection;
pub mod kalman;
pub mod metrics;
pub mod motio;
pub mod pipeline;
pub mod reid;
pub mod synth;
pub mod track;
pub mod trackers;

pub use bbox::BBox;
pub use detection::{Detection, Feature};
pub use track::{Track, TrackId, TrackState};
