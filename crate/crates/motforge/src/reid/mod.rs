//! Unsupervised ReID: generate tracklet pseudo-labels from unlabeled
//! sequences, train a softmax cross-entropy embedding model on them, and
//! serve embeddings (plus the baseline embedders) to the trackers.

mod embedder;
mod labels;
mod model;
mod train;

pub use embedder::{EmbedError, Embedder};
pub use labels::{generate_labels, labels_from_ground_truth};
pub use model::{EmbeddingModel, ModelIoError};
pub use train::{loss_and_gradients, train, Gradients, TrainConfig, TrainError, TrainOutcome};
