//! Appearance-augmented tracker: a matching cascade over recently updated
//! tracks using gallery cosine distances under a Mahalanobis gate, with an
//! IoU fallback for whatever remains.

use serde::{Deserialize, Serialize};

use super::{iou_cost, SortConfig, TrackStore, TrackerError, INFEASIBLE_COST};
use crate::assign::{solve_optimal, CostMatrix};
use crate::bbox::bbox_to_measurement;
use crate::detection::Detection;
use crate::kalman::{KalmanFilter, GATE_CHI2_95_4DOF};
use crate::track::{Track, TrackId};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReidConfig {
    /// Cosine-distance threshold: appearance costs at or above this never
    /// match in the cascade.
    pub appearance_infeasible_above: f64,
    /// Per-track appearance gallery size.
    pub gallery_budget: usize,
    /// Squared-Mahalanobis gate on candidate measurements (chi-square 95%
    /// quantile for 4 degrees of freedom by default).
    pub gate_threshold: f64,
    /// Cascade depth in frames; `None` follows the lifecycle `max_age`.
    pub cascade_depth: Option<u32>,
    /// IoU cost threshold for the fallback stage.
    pub iou_fallback_infeasible_above: f64,
}

impl Default for ReidConfig {
    fn default() -> Self {
        Self {
            appearance_infeasible_above: 0.25,
            gallery_budget: 100,
            gate_threshold: GATE_CHI2_95_4DOF,
            cascade_depth: None,
            iou_fallback_infeasible_above: 0.7,
        }
    }
}

impl ReidConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.appearance_infeasible_above <= 0.0 {
            return Err("appearance_infeasible_above must be positive".into());
        }
        if self.gallery_budget == 0 {
            return Err("gallery_budget must be positive".into());
        }
        if self.gate_threshold <= 0.0 {
            return Err("gate_threshold must be positive".into());
        }
        if self.iou_fallback_infeasible_above <= 0.0 {
            return Err("iou_fallback_infeasible_above must be positive".into());
        }
        Ok(())
    }
}

pub struct ReidTracker {
    lifecycle: SortConfig,
    config: ReidConfig,
    store: TrackStore,
}

impl ReidTracker {
    pub fn new(lifecycle: SortConfig, config: ReidConfig) -> Self {
        let kf = KalmanFilter::new(lifecycle.kalman);
        Self {
            lifecycle,
            config,
            store: TrackStore::new(kf),
        }
    }

    fn cascade_depth(&self) -> u32 {
        self.config.cascade_depth.unwrap_or(self.lifecycle.max_age)
    }

    /// Advance one frame. Every detection must carry a feature.
    pub fn step(
        &mut self,
        frame: u32,
        detections: &[Detection],
    ) -> Result<Vec<Option<TrackId>>, TrackerError> {
        for (index, d) in detections.iter().enumerate() {
            if d.feature.is_none() {
                return Err(TrackerError::MissingFeature { index });
            }
        }
        self.store.advance_to(frame, detections)?;

        let mut assigned: Vec<Option<TrackId>> = vec![None; detections.len()];
        let mut track_matched = vec![false; self.store.live.len()];
        let mut det_remaining: Vec<usize> = (0..detections.len()).collect();

        // Appearance cascade: confirmed tracks grouped by ascending staleness
        // so recently updated tracks get first pick.
        for level in 0..self.cascade_depth() {
            if det_remaining.is_empty() {
                break;
            }
            let group: Vec<usize> = (0..self.store.live.len())
                .filter(|&t| {
                    let track = &self.store.live[t];
                    !track_matched[t]
                        && track.is_confirmed()
                        && track.time_since_update == level + 1
                })
                .collect();
            if group.is_empty() {
                continue;
            }

            let measurements: Vec<_> = det_remaining
                .iter()
                .map(|&d| bbox_to_measurement(&detections[d].bbox))
                .collect();
            let mut cost = Vec::with_capacity(group.len() * det_remaining.len());
            for &t in &group {
                let track = &self.store.live[t];
                let gates = self
                    .store
                    .kf
                    .gating_distance(&track.kalman, &measurements)?;
                for (j, &d) in det_remaining.iter().enumerate() {
                    let feature = detections[d].feature.as_ref().expect("checked above");
                    let appearance = track.appearance_distance(feature);
                    let c = match appearance {
                        Some(a) if gates[j] <= self.config.gate_threshold => a,
                        _ => INFEASIBLE_COST,
                    };
                    cost.push(c);
                }
            }
            let cost = CostMatrix::new(group.len(), det_remaining.len(), cost)?;
            let result = solve_optimal(&cost, self.config.appearance_infeasible_above)?;

            let mut consumed = Vec::new();
            for &(g, d_local) in &result.matches {
                let t = group[g];
                let d = det_remaining[d_local];
                self.store.apply_match(
                    t,
                    frame,
                    &detections[d],
                    d,
                    Some(self.config.gallery_budget),
                )?;
                assigned[d] = Some(self.store.live[t].id);
                track_matched[t] = true;
                consumed.push(d);
            }
            det_remaining.retain(|d| !consumed.contains(d));
        }

        // IoU fallback over everything still unmatched, Tentative tracks
        // included.
        let fallback_tracks: Vec<usize> = (0..self.store.live.len())
            .filter(|&t| !track_matched[t])
            .collect();
        if !fallback_tracks.is_empty() && !det_remaining.is_empty() {
            let predicted = self.store.predicted_boxes();
            let cost = CostMatrix::from_fn(fallback_tracks.len(), det_remaining.len(), |ti, dj| {
                iou_cost(
                    &predicted[fallback_tracks[ti]],
                    &detections[det_remaining[dj]],
                )
            });
            let result = solve_optimal(&cost, self.config.iou_fallback_infeasible_above)?;
            let mut consumed = Vec::new();
            for &(ti, dj) in &result.matches {
                let t = fallback_tracks[ti];
                let d = det_remaining[dj];
                self.store.apply_match(
                    t,
                    frame,
                    &detections[d],
                    d,
                    Some(self.config.gallery_budget),
                )?;
                assigned[d] = Some(self.store.live[t].id);
                track_matched[t] = true;
                consumed.push(d);
            }
            det_remaining.retain(|d| !consumed.contains(d));
        }

        for &d in &det_remaining {
            if detections[d].confidence >= self.lifecycle.confidence_min {
                assigned[d] = Some(self.store.spawn(
                    frame,
                    &detections[d],
                    d,
                    Some(self.config.gallery_budget),
                    None,
                )?);
            }
        }

        self.store
            .finalize_frame(self.lifecycle.max_age, self.lifecycle.min_hits);
        Ok(assigned)
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.store.live.iter().chain(self.store.retired.iter())
    }

    pub fn finish(self) -> Vec<Track> {
        self.store.into_tracks()
    }
}
