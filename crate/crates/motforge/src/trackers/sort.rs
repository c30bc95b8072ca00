//! Appearance-free SORT: Kalman prediction plus optimal IoU matching.

use serde::{Deserialize, Serialize};

use super::{iou_cost, TrackStore, TrackerError};
use crate::assign::{solve_optimal, CostMatrix};
use crate::detection::Detection;
use crate::kalman::{KalmanConfig, KalmanFilter};
use crate::track::{Track, TrackId};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SortConfig {
    /// IoU cost threshold: pairs with `1 - IoU >=` this value never match
    /// (default 0.7, i.e. minimum IoU 0.3).
    pub iou_infeasible_above: f64,
    /// Frames a track survives without a match. Label generation uses 1 to
    /// keep tracklets pure; evaluation runs default to 30.
    pub max_age: u32,
    /// Matched detections required before a track is confirmed.
    pub min_hits: u32,
    /// Detections below this confidence never spawn tracks.
    pub confidence_min: f64,
    pub kalman: KalmanConfig,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            iou_infeasible_above: 0.7,
            max_age: 30,
            min_hits: 3,
            confidence_min: 0.0,
            kalman: KalmanConfig::default(),
        }
    }
}

impl SortConfig {
    /// Short-patience profile for tracklet label generation: identity merges
    /// poison cross-entropy labels, so unmatched tracks die after one frame.
    pub fn label_generation() -> Self {
        Self {
            max_age: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_age < 1 {
            return Err("max_age must be >= 1".into());
        }
        if self.min_hits < 1 {
            return Err("min_hits must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.iou_infeasible_above) {
            return Err("iou_infeasible_above must be in [0, 1]".into());
        }
        Ok(())
    }
}

pub struct SortTracker {
    config: SortConfig,
    store: TrackStore,
}

impl SortTracker {
    pub fn new(config: SortConfig) -> Self {
        let kf = KalmanFilter::new(config.kalman);
        Self {
            config,
            store: TrackStore::new(kf),
        }
    }

    pub fn config(&self) -> &SortConfig {
        &self.config
    }

    /// Advance one frame: predict, match by IoU, update matched tracks,
    /// spawn tracks from unmatched detections, apply lifecycle rules.
    /// Returns the assigned track id per detection.
    pub fn step(
        &mut self,
        frame: u32,
        detections: &[Detection],
    ) -> Result<Vec<Option<TrackId>>, TrackerError> {
        self.store.advance_to(frame, detections)?;

        let predicted = self.store.predicted_boxes();
        let cost = CostMatrix::from_fn(predicted.len(), detections.len(), |t, d| {
            iou_cost(&predicted[t], &detections[d])
        });
        let assignment = solve_optimal(&cost, self.config.iou_infeasible_above)?;

        let mut assigned: Vec<Option<TrackId>> = vec![None; detections.len()];
        for &(t, d) in &assignment.matches {
            self.store.apply_match(t, frame, &detections[d], d, None)?;
            assigned[d] = Some(self.store.live[t].id);
        }
        for &d in &assignment.unmatched_columns {
            if detections[d].confidence >= self.config.confidence_min {
                assigned[d] = Some(self.store.spawn(frame, &detections[d], d, None, None)?);
            }
        }

        self.store
            .finalize_frame(self.config.max_age, self.config.min_hits);
        Ok(assigned)
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.store.live.iter().chain(self.store.retired.iter())
    }

    /// Consume the tracker, returning every track it ever created.
    pub fn finish(self) -> Vec<Track> {
        self.store.into_tracks()
    }
}
