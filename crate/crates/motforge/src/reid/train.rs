//! Mini-batch SGD training of the embedding classifier with softmax
//! cross-entropy, momentum, cosine learning-rate decay, and L2 weight decay.
//! Single-threaded over a deterministic batch schedule: a fixed seed yields
//! bitwise-identical parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::EmbeddingModel;
use crate::motio::LabelDataset;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Tracklets shorter than this are dropped during label generation.
    pub min_tracklet_length: usize,
    pub weight_decay: f64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            min_tracklet_length: 2,
            weight_decay: 1e-4,
            hidden_dim: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(TrainError::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset records carry no features")]
    MissingFeatures,
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("record {index} has feature dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Parameter gradients, same shapes as the model tensors.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Objective value and analytic gradients on one batch: mean softmax
/// cross-entropy plus `0.5 * weight_decay * (|W1|^2 + |W2|^2)`.
pub fn loss_and_gradients(
    model: &EmbeddingModel,
    inputs: &[&[f64]],
    targets: &[usize],
    weight_decay: f64,
) -> (f64, Gradients) {
    assert_eq!(inputs.len(), targets.len());
    let n = inputs.len();
    let (d, h, k) = (model.input_dim, model.hidden_dim, model.class_count);
    let mut grads = Gradients {
        w1: vec![0.0; h * d],
        b1: vec![0.0; h],
        w2: vec![0.0; k * h],
        b2: vec![0.0; k],
    };
    let mut loss = 0.0;

    for (x, &y) in inputs.iter().zip(targets) {
        let hidden = model.hidden(x);
        let logits = model.logits_from_hidden(&hidden);

        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        loss += sum.ln() + max - logits[y];

        // dL/dz2 = softmax - onehot(y), averaged over the batch later.
        let mut dz2: Vec<f64> = exp.iter().map(|e| e / sum).collect();
        dz2[y] -= 1.0;

        for (c, &g2) in dz2.iter().enumerate() {
            grads.b2[c] += g2;
            let row = &mut grads.w2[c * h..(c + 1) * h];
            for (j, r) in row.iter_mut().enumerate() {
                *r += g2 * hidden[j];
            }
        }
        for (j, &hj) in hidden.iter().enumerate() {
            if hj <= 0.0 {
                continue; // rectifier gate
            }
            let mut dh = 0.0;
            for (c, &g2) in dz2.iter().enumerate() {
                dh += g2 * model.w2[c * h + j];
            }
            grads.b1[j] += dh;
            let row = &mut grads.w1[j * d..(j + 1) * d];
            for (i, r) in row.iter_mut().enumerate() {
                *r += dh * x[i];
            }
        }
    }

    let inv = 1.0 / n as f64;
    loss *= inv;
    for g in grads
        .w1
        .iter_mut()
        .chain(grads.b1.iter_mut())
        .chain(grads.w2.iter_mut())
        .chain(grads.b2.iter_mut())
    {
        *g *= inv;
    }
    if weight_decay > 0.0 {
        let mut penalty = 0.0;
        for (g, w) in grads.w1.iter_mut().zip(&model.w1) {
            *g += weight_decay * w;
            penalty += w * w;
        }
        for (g, w) in grads.w2.iter_mut().zip(&model.w2) {
            *g += weight_decay * w;
            penalty += w * w;
        }
        loss += 0.5 * weight_decay * penalty;
    }
    (loss, grads)
}

pub fn train(dataset: &LabelDataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if dataset.records.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let input_dim = dataset.feature_dim().ok_or(TrainError::MissingFeatures)?;
    let class_count = dataset.class_count();
    if class_count < 2 {
        return Err(TrainError::TooFewClasses(class_count));
    }
    for (index, r) in dataset.records.iter().enumerate() {
        match &r.feature {
            Some(f) if f.dim() == input_dim => {}
            Some(f) => {
                return Err(TrainError::DimensionMismatch {
                    index,
                    expected: input_dim,
                    got: f.dim(),
                })
            }
            None => return Err(TrainError::MissingFeatures),
        }
    }

    // Class-balanced sampling: pick a class, then one of its members, so
    // long tracklets do not dominate the objective.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, r) in dataset.records.iter().enumerate() {
        members[r.label as usize].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = EmbeddingModel::init(input_dim, config.hidden_dim, class_count, &mut rng);
    let mut velocity = Gradients {
        w1: vec![0.0; model.w1.len()],
        b1: vec![0.0; model.b1.len()],
        w2: vec![0.0; model.w2.len()],
        b2: vec![0.0; model.b2.len()],
    };

    let batches_per_epoch = dataset.records.len().div_ceil(config.batch_size);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.learning_rate
            * 0.5
            * (1.0 + (std::f64::consts::PI * epoch as f64 / config.epochs as f64).cos());
        let mut epoch_loss = 0.0;
        for _ in 0..batches_per_epoch {
            let mut inputs: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
            let mut targets: Vec<usize> = Vec::with_capacity(config.batch_size);
            for _ in 0..config.batch_size {
                let class = rng.random_range(0..class_count);
                let member = members[class][rng.random_range(0..members[class].len())];
                inputs.push(
                    dataset.records[member]
                        .feature
                        .as_ref()
                        .expect("checked")
                        .values(),
                );
                targets.push(class);
            }
            let (loss, grads) = loss_and_gradients(&model, &inputs, &targets, config.weight_decay);
            epoch_loss += loss;

            let step = |param: &mut [f64], vel: &mut [f64], grad: &[f64]| {
                for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
                    *v = config.momentum * *v + g;
                    *p -= lr * *v;
                }
            };
            step(&mut model.w1, &mut velocity.w1, &grads.w1);
            step(&mut model.b1, &mut velocity.b1, &grads.b1);
            step(&mut model.w2, &mut velocity.w2, &grads.w2);
            step(&mut model.b2, &mut velocity.b2, &grads.b2);
        }
        loss_trace.push(epoch_loss / batches_per_epoch as f64);
    }

    Ok(TrainOutcome { model, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BBox;
    use crate::detection::Feature;
    use crate::motio::LabelRecord;
    use rand_distr::Distribution;

    fn bb() -> BBox {
        BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()
    }

    /// One-hot class codes plus small noise: linearly separable.
    fn separable_dataset(classes: usize, per_class: usize, seed: u64) -> LabelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
        let mut records = Vec::new();
        for label in 0..classes {
            for i in 0..per_class {
                let mut v = vec![0.0; classes];
                v[label] = 1.0;
                for x in &mut v {
                    *x += normal.sample(&mut rng);
                }
                records.push(LabelRecord {
                    video_id: "fixture".into(),
                    label: label as u32,
                    frame: i as u32 + 1,
                    bbox: bb(),
                    feature: Some(Feature::normalized(v).unwrap()),
                });
            }
        }
        LabelDataset { records }
    }

    #[test]
    fn initial_loss_is_ln_k() {
        // Zero output weights give a uniform predictive distribution.
        let ds = separable_dataset(5, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = EmbeddingModel::init(5, 16, 5, &mut rng);
        let inputs: Vec<&[f64]> = ds
            .records
            .iter()
            .map(|r| r.feature.as_ref().unwrap().values())
            .collect();
        let targets: Vec<usize> = ds.records.iter().map(|r| r.label as usize).collect();
        let (loss, _) = loss_and_gradients(&model, &inputs, &targets, 0.0);
        assert!((loss - (5.0f64).ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn separable_dataset_trains_to_high_accuracy() {
        let ds = separable_dataset(6, 20, 7);
        let config = TrainConfig {
            hidden_dim: 32,
            epochs: 60,
            batch_size: 16,
            seed: 1,
            ..TrainConfig::default()
        };
        let out = train(&ds, &config).unwrap();
        let correct = ds
            .records
            .iter()
            .filter(|r| {
                let logits = out.model.logits(r.feature.as_ref().unwrap().values());
                let argmax = logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                argmax == r.label as usize
            })
            .count();
        let accuracy = correct as f64 / ds.records.len() as f64;
        assert!(accuracy >= 0.99, "accuracy {accuracy}");
        assert!(out.loss_trace.iter().all(|l| l.is_finite()));
        // Epoch-mean loss has settled by the end of training: non-increasing
        // over the last five epochs up to batch-sampling noise.
        let tail = &out.loss_trace[out.loss_trace.len() - 5..];
        assert!(
            tail.windows(2).all(|w| w[1] <= w[0] + 5e-3),
            "tail {tail:?}"
        );
        assert!(tail[4] < 0.1, "final loss {}", tail[4]);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        for trial in 0..5 {
            let (d, h, k) = (3 + trial % 2, 4, 3);
            let mut model = EmbeddingModel::init(d, h, k, &mut rng);
            // Random head too, so W2 gradients are exercised away from zero.
            model
                .w2
                .iter_mut()
                .for_each(|w| *w = 0.3 * normal.sample(&mut rng));
            model
                .b2
                .iter_mut()
                .for_each(|b| *b = 0.1 * normal.sample(&mut rng));
            let inputs: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            let input_refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
            let targets: Vec<usize> = (0..5).map(|_| rng.random_range(0..k)).collect();

            let (_, grads) = loss_and_gradients(&model, &input_refs, &targets, 1e-3);
            let eps = 1e-5;
            let mut worst = 0.0f64;
            for tensor in 0..4 {
                let len = match tensor {
                    0 => model.w1.len(),
                    1 => model.b1.len(),
                    2 => model.w2.len(),
                    _ => model.b2.len(),
                };
                for i in 0..len {
                    let probe = |delta: f64| {
                        let mut m = model.clone();
                        match tensor {
                            0 => m.w1[i] += delta,
                            1 => m.b1[i] += delta,
                            2 => m.w2[i] += delta,
                            _ => m.b2[i] += delta,
                        }
                        loss_and_gradients(&m, &input_refs, &targets, 1e-3).0
                    };
                    let numeric = (probe(eps) - probe(-eps)) / (2.0 * eps);
                    let analytic = match tensor {
                        0 => grads.w1[i],
                        1 => grads.b1[i],
                        2 => grads.w2[i],
                        _ => grads.b2[i],
                    };
                    let rel =
                        (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3);
                    worst = worst.max(rel);
                }
            }
            assert!(worst < 1e-4, "max relative error {worst}");
        }
    }

    #[test]
    fn fixed_seed_reproduces_parameters_bitwise() {
        let ds = separable_dataset(4, 6, 9);
        let config = TrainConfig {
            hidden_dim: 16,
            epochs: 5,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train(&ds, &config).unwrap();
        let b = train(&ds, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn degenerate_datasets_are_rejected() {
        assert!(matches!(
            train(&LabelDataset::default(), &TrainConfig::default()),
            Err(TrainError::EmptyDataset)
        ));
        let one_class = LabelDataset {
            records: vec![LabelRecord {
                video_id: "v".into(),
                label: 0,
                frame: 1,
                bbox: bb(),
                feature: Some(Feature::unit(vec![1.0, 0.0]).unwrap()),
            }],
        };
        assert!(matches!(
            train(&one_class, &TrainConfig::default()),
            Err(TrainError::TooFewClasses(1))
        ));
    }

    #[test]
    fn embeddings_cluster_by_class_after_training() {
        let ds = separable_dataset(5, 10, 13);
        let config = TrainConfig {
            hidden_dim: 32,
            epochs: 40,
            seed: 3,
            ..TrainConfig::default()
        };
        let out = train(&ds, &config).unwrap();
        let embeddings: Vec<(u32, Feature)> = ds
            .records
            .iter()
            .map(|r| {
                (
                    r.label,
                    out.model.embed(r.feature.as_ref().unwrap().values()),
                )
            })
            .collect();
        let mut within = Vec::new();
        let mut between = Vec::new();
        for (i, (la, fa)) in embeddings.iter().enumerate() {
            for (lb, fb) in embeddings.iter().skip(i + 1) {
                let sim = fa.dot(fb);
                if la == lb {
                    within.push(sim);
                } else {
                    between.push(sim);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&within) > mean(&between),
            "within {} between {}",
            mean(&within),
            mean(&between)
        );
    }
}
