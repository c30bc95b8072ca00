//! Embedding providers for the ablation ladder: the trained model, fresh
//! random vectors, a fixed generic projection of the raw features, and
//! identity-revealing oracle codes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::model::EmbeddingModel;
use crate::detection::{Detection, Feature};
use crate::motio::SequenceBundle;
use crate::trackers::annotate_identities;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("detection {index} carries no raw feature")]
    MissingRawFeature { index: usize },
    #[error("detection {index} has feature dimension {got}, the embedder expects {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("the oracle embedder requires ground truth")]
    MissingGroundTruth,
}

/// Maps each detection of a sequence to the appearance feature the ReID
/// tracker will consume.
pub enum Embedder {
    /// Trained model: embed the raw feature through the hidden layer. Also
    /// serves the supervised baseline (same architecture, different labels).
    Model(EmbeddingModel),
    /// A fresh random unit vector per detection; appearance carries no
    /// information at all.
    Random { dim: usize, seed: u64 },
    /// A fixed seeded linear map of the raw feature, normalized. Stands in
    /// for generic pretrained features: informative exactly as far as the
    /// raw geometry is.
    Generic {
        matrix: Vec<f64>,
        input_dim: usize,
        output_dim: usize,
    },
    /// One-hot code per ground-truth identity; detections matching no
    /// identity get a private basis direction that matches nothing.
    Oracle { iou_min: f64 },
}

impl Embedder {
    pub fn generic(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let matrix = (0..input_dim * output_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Embedder::Generic {
            matrix,
            input_dim,
            output_dim,
        }
    }

    /// Replace every detection's feature with this embedder's output.
    pub fn apply(&self, bundle: &SequenceBundle) -> Result<Vec<Detection>, EmbedError> {
        let mut out = bundle.detections.clone();
        match self {
            Embedder::Model(model) => {
                for (index, d) in out.iter_mut().enumerate() {
                    let raw = d
                        .feature
                        .as_ref()
                        .ok_or(EmbedError::MissingRawFeature { index })?;
                    if raw.dim() != model.input_dim {
                        return Err(EmbedError::DimensionMismatch {
                            index,
                            expected: model.input_dim,
                            got: raw.dim(),
                        });
                    }
                    d.feature = Some(model.embed(raw.values()));
                }
            }
            Embedder::Random { dim, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let normal = Normal::new(0.0, 1.0).expect("valid normal");
                for d in out.iter_mut() {
                    let v: Vec<f64> = (0..*dim).map(|_| normal.sample(&mut rng)).collect();
                    d.feature =
                        Some(Feature::normalized(v).unwrap_or_else(|_| unit_basis(*dim, 0)));
                }
            }
            Embedder::Generic {
                matrix,
                input_dim,
                output_dim,
            } => {
                for (index, d) in out.iter_mut().enumerate() {
                    let raw = d
                        .feature
                        .as_ref()
                        .ok_or(EmbedError::MissingRawFeature { index })?;
                    if raw.dim() != *input_dim {
                        return Err(EmbedError::DimensionMismatch {
                            index,
                            expected: *input_dim,
                            got: raw.dim(),
                        });
                    }
                    let x = raw.values();
                    let mut y = vec![0.0; *output_dim];
                    for (o, yo) in y.iter_mut().enumerate() {
                        let row = &matrix[o * input_dim..(o + 1) * input_dim];
                        *yo = row.iter().zip(x).map(|(w, v)| w * v).sum();
                    }
                    d.feature =
                        Some(Feature::normalized(y).unwrap_or_else(|_| unit_basis(*output_dim, 0)));
                }
            }
            Embedder::Oracle { iou_min } => {
                let gt = bundle
                    .ground_truth
                    .as_ref()
                    .ok_or(EmbedError::MissingGroundTruth)?;
                let identities = annotate_identities(&bundle.detections, gt, *iou_min);
                let mut known: Vec<u32> = identities.iter().flatten().copied().collect();
                known.sort_unstable();
                known.dedup();
                let unknowns = identities.iter().filter(|i| i.is_none()).count();
                let dim = (known.len() + unknowns).max(1);
                let mut next_private = known.len();
                for (d, identity) in out.iter_mut().zip(&identities) {
                    let slot = match identity {
                        Some(id) => known.binary_search(id).expect("collected above"),
                        None => {
                            let s = next_private;
                            next_private += 1;
                            s
                        }
                    };
                    d.feature = Some(unit_basis(dim, slot));
                }
            }
        }
        Ok(out)
    }
}

fn unit_basis(dim: usize, index: usize) -> Feature {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    Feature::unit(v).expect("unit basis")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BBox;
    use crate::motio::GtRecord;

    fn bundle_with(detections: Vec<Detection>, gt: Option<Vec<GtRecord>>) -> SequenceBundle {
        SequenceBundle {
            name: "t".into(),
            frame_count: detections.iter().map(|d| d.frame).max().unwrap_or(1),
            frame_rate: 30.0,
            detections,
            ground_truth: gt,
        }
    }

    fn det(frame: u32, l: f64, raw: Vec<f64>) -> Detection {
        Detection::new(frame, BBox::new(l, 0.0, 10.0, 20.0).unwrap(), 1.0)
            .with_feature(Feature::normalized(raw).unwrap())
    }

    #[test]
    fn random_features_are_near_orthogonal() {
        let b = bundle_with(
            vec![det(1, 0.0, vec![1.0, 0.0]), det(2, 0.0, vec![1.0, 0.0])],
            None,
        );
        let embedder = Embedder::Random { dim: 128, seed: 5 };
        let out = embedder.apply(&b).unwrap();
        let sim = out[0]
            .feature
            .as_ref()
            .unwrap()
            .dot(out[1].feature.as_ref().unwrap());
        assert!(sim.abs() < 0.4, "similarity {sim}");
    }

    #[test]
    fn generic_projection_is_deterministic() {
        let b = bundle_with(vec![det(1, 0.0, vec![0.3, -0.8, 0.52])], None);
        let e1 = Embedder::generic(3, 16, 9);
        let e2 = Embedder::generic(3, 16, 9);
        assert_eq!(e1.apply(&b).unwrap(), e2.apply(&b).unwrap());
    }

    #[test]
    fn generic_projection_preserves_identical_inputs() {
        let b = bundle_with(
            vec![det(1, 0.0, vec![0.6, 0.8]), det(2, 0.0, vec![0.6, 0.8])],
            None,
        );
        let out = Embedder::generic(2, 8, 1).apply(&b).unwrap();
        assert_eq!(out[0].feature, out[1].feature);
    }

    #[test]
    fn oracle_codes_agree_exactly_with_identity() {
        let gt = vec![
            GtRecord {
                frame: 1,
                identity: 4,
                bbox: BBox::new(0.0, 0.0, 10.0, 20.0).unwrap(),
                visibility: 1.0,
            },
            GtRecord {
                frame: 2,
                identity: 4,
                bbox: BBox::new(1.0, 0.0, 10.0, 20.0).unwrap(),
                visibility: 1.0,
            },
        ];
        let b = bundle_with(
            vec![
                det(1, 0.0, vec![1.0, 0.0]),
                det(2, 1.0, vec![1.0, 0.0]),
                det(2, 300.0, vec![1.0, 0.0]), // matches nothing
            ],
            Some(gt),
        );
        let out = Embedder::Oracle { iou_min: 0.5 }.apply(&b).unwrap();
        let f0 = out[0].feature.as_ref().unwrap();
        let f1 = out[1].feature.as_ref().unwrap();
        let f2 = out[2].feature.as_ref().unwrap();
        assert_eq!(f0, f1);
        assert_eq!(f0.dot(f2), 0.0);
    }

    #[test]
    fn oracle_without_ground_truth_is_an_error() {
        let b = bundle_with(vec![det(1, 0.0, vec![1.0, 0.0])], None);
        assert!(matches!(
            Embedder::Oracle { iou_min: 0.5 }.apply(&b),
            Err(EmbedError::MissingGroundTruth)
        ));
    }

    #[test]
    fn model_embedder_requires_raw_features() {
        let mut d = det(1, 0.0, vec![1.0, 0.0]);
        d.feature = None;
        let b = bundle_with(vec![d], None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = EmbeddingModel::init(2, 4, 2, &mut rng);
        assert!(matches!(
            Embedder::Model(model).apply(&b),
            Err(EmbedError::MissingRawFeature { index: 0 })
        ));
    }
}
