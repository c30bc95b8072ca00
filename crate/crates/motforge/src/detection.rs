//! Detections and appearance feature vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::BBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature vector is empty")]
    Empty,
    #[error("feature vector contains a non-finite component")]
    NonFinite,
    #[error("feature vector has L2 norm {0}, expected 1 within 1e-6")]
    NotUnit(f64),
    #[error("feature vector has zero norm and cannot be normalized")]
    ZeroNorm,
}

/// A unit-length appearance vector.
///
/// Construction either validates an already-normalized vector
/// ([`Feature::unit`]) or rescales an arbitrary one ([`Feature::normalized`]).
/// Vectors already within 1e-9 of unit norm are passed through unchanged so
/// that write/read round trips are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature(Vec<f64>);

impl Feature {
    pub fn unit(values: Vec<f64>) -> Result<Self, FeatureError> {
        let norm = Self::check_norm(&values)?;
        if (norm - 1.0).abs() > 1e-6 {
            return Err(FeatureError::NotUnit(norm));
        }
        Ok(Self(values))
    }

    pub fn normalized(mut values: Vec<f64>) -> Result<Self, FeatureError> {
        let norm = Self::check_norm(&values)?;
        if norm == 0.0 {
            return Err(FeatureError::ZeroNorm);
        }
        if (norm - 1.0).abs() > 1e-9 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(Self(values))
    }

    fn check_norm(values: &[f64]) -> Result<f64, FeatureError> {
        if values.is_empty() {
            return Err(FeatureError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite);
        }
        Ok(values.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Feature) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Cosine distance between unit vectors: `1 - a·b`, in `[0, 2]`.
    pub fn cosine_distance(&self, other: &Feature) -> f64 {
        1.0 - self.dot(other)
    }
}

impl AsRef<[f64]> for Feature {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// One detector output box at one frame. Frames are 1-based, matching the
/// MOT Challenge file formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    pub feature: Option<Feature>,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
            feature: None,
        }
    }

    pub fn with_feature(mut self, feature: Feature) -> Self {
        self.feature = Some(feature);
        self
    }
}
