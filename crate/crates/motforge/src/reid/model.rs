//! One-hidden-layer softmax classifier over per-detection feature vectors.
//! The L2-normalized hidden activation is the ReID embedding; the classifier
//! head exists only for training.

use std::io::{BufRead, Write};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::detection::Feature;

const FORMAT_HEADER: &str = "motforge-model v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub class_count: usize,
    /// hidden_dim x input_dim, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// class_count x hidden_dim, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl EmbeddingModel {
    /// He-initialized hidden layer; zero output layer, so the initial
    /// predictive distribution is uniform and the initial loss is ln K.
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        class_count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let normal = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).expect("valid normal");
        let w1 = (0..hidden_dim * input_dim)
            .map(|_| normal.sample(rng))
            .collect();
        Self {
            input_dim,
            hidden_dim,
            class_count,
            w1,
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; class_count * hidden_dim],
            b2: vec![0.0; class_count],
        }
    }

    /// Rectified hidden activations.
    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut h = vec![0.0; self.hidden_dim];
        for (i, hi) in h.iter_mut().enumerate() {
            let row = &self.w1[i * self.input_dim..(i + 1) * self.input_dim];
            let z: f64 = self.b1[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hi = z.max(0.0);
        }
        h
    }

    pub fn logits_from_hidden(&self, hidden: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.class_count];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
            *zk = self.b2[k] + row.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>();
        }
        z
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_from_hidden(&self.hidden(x))
    }

    /// The embedding plus a flag for the all-zero-activation fallback.
    pub fn embed_detailed(&self, x: &[f64]) -> (Feature, bool) {
        let h = self.hidden(x);
        match Feature::normalized(h) {
            Ok(f) => (f, false),
            Err(_) => {
                let mut basis = vec![0.0; self.hidden_dim];
                basis[0] = 1.0;
                (Feature::unit(basis).expect("unit basis"), true)
            }
        }
    }

    /// L2-normalized hidden activation; falls back to the first basis vector
    /// when every hidden unit is inactive.
    pub fn embed(&self, x: &[f64]) -> Feature {
        self.embed_detailed(x).0
    }

    pub fn save(&self, mut w: impl Write) -> Result<(), ModelIoError> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "input_dim={}", self.input_dim)?;
        writeln!(w, "hidden_dim={}", self.hidden_dim)?;
        writeln!(w, "class_count={}", self.class_count)?;
        for (name, tensor) in [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ] {
            write!(w, "{name}")?;
            for v in tensor {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load(reader: impl BufRead) -> Result<Self, ModelIoError> {
        let mut lines = reader.lines().enumerate();
        let mut next_line = |what: &str| -> Result<(usize, String), ModelIoError> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(ModelIoError::Format {
                    line: 0,
                    message: format!("missing {what}"),
                }),
            }
        };

        let (line, header) = next_line("header")?;
        if header.trim() != FORMAT_HEADER {
            return Err(ModelIoError::Format {
                line,
                message: format!("expected header {FORMAT_HEADER:?}, got {header:?}"),
            });
        }
        let mut dim = |key: &str| -> Result<usize, ModelIoError> {
            let (line, text) = next_line(key)?;
            let (k, v) = text.split_once('=').ok_or_else(|| ModelIoError::Format {
                line,
                message: "expected key=value".into(),
            })?;
            if k != key {
                return Err(ModelIoError::Format {
                    line,
                    message: format!("expected key {key:?}, got {k:?}"),
                });
            }
            v.trim().parse().map_err(|_| ModelIoError::Format {
                line,
                message: format!("cannot parse {v:?}"),
            })
        };
        let input_dim = dim("input_dim")?;
        let hidden_dim = dim("hidden_dim")?;
        let class_count = dim("class_count")?;

        let mut tensor = |name: &str, expected: usize| -> Result<Vec<f64>, ModelIoError> {
            let (line, text) = next_line(name)?;
            let mut parts = text.split_whitespace();
            if parts.next() != Some(name) {
                return Err(ModelIoError::Format {
                    line,
                    message: format!("expected tensor {name:?}"),
                });
            }
            let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values = values.map_err(|_| ModelIoError::Format {
                line,
                message: format!("bad float in tensor {name:?}"),
            })?;
            if values.len() != expected {
                return Err(ModelIoError::Format {
                    line,
                    message: format!(
                        "tensor {name:?} has {} values, expected {expected}",
                        values.len()
                    ),
                });
            }
            Ok(values)
        };
        let w1 = tensor("w1", hidden_dim * input_dim)?;
        let b1 = tensor("b1", hidden_dim)?;
        let w2 = tensor("w2", class_count * hidden_dim)?;
        let b2 = tensor("b2", class_count)?;
        Ok(Self {
            input_dim,
            hidden_dim,
            class_count,
            w1,
            b1,
            w2,
            b2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn model() -> EmbeddingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        EmbeddingModel::init(4, 8, 3, &mut rng)
    }

    #[test]
    fn embeddings_are_unit_and_deterministic() {
        let m = model();
        let x = [0.5, -0.25, 1.0, 0.0];
        let a = m.embed(&x);
        let b = m.embed(&x);
        assert_eq!(a, b);
        let norm: f64 = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dead_hidden_layer_falls_back_to_basis_vector() {
        let mut m = model();
        m.w1.iter_mut().for_each(|w| *w = 0.0);
        m.b1.iter_mut().for_each(|b| *b = -1.0);
        let (f, degenerate) = m.embed_detailed(&[1.0, 1.0, 1.0, 1.0]);
        assert!(degenerate);
        assert_eq!(f.values()[0], 1.0);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let loaded = EmbeddingModel::load(buf.as_slice()).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        let m = model();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("hidden_dim=8", "hidden_dim=9");
        assert!(EmbeddingModel::load(text.as_bytes()).is_err());
    }
}
