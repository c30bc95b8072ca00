//! Frame-by-frame trackers sharing the assignment and Kalman substrate:
//! appearance-free SORT, the appearance-gated ReID tracker, and a
//! ground-truth oracle associator.

mod oracle;
mod reid_tracker;
mod sort;

pub use oracle::{annotate_identities, OracleTracker};
pub use reid_tracker::{ReidConfig, ReidTracker};
pub use sort::{SortConfig, SortTracker};

use thiserror::Error;

use crate::bbox::{bbox_to_measurement, iou};
use crate::detection::Detection;
use crate::kalman::KalmanFilter;
use crate::motio::TrackedBox;
use crate::track::{Observation, Track, TrackId, TrackState};

/// Cost assigned to pairs that must never match; above any IoU or cosine
/// feasibility threshold in use.
const INFEASIBLE_COST: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("frame {got} does not advance past frame {last}")]
    FrameRegression { last: u32, got: u32 },
    #[error("detection {index} at frame {frame} is not at the step frame {expected}")]
    WrongFrame {
        index: usize,
        frame: u32,
        expected: u32,
    },
    #[error("detection {index} carries no appearance feature")]
    MissingFeature { index: usize },
    #[error("assignment failed: {0}")]
    Assign(#[from] crate::assign::AssignError),
    #[error("kalman failure: {0}")]
    Kalman(#[from] crate::kalman::KalmanError),
}

/// Mutable track storage shared by the tracker implementations. Ids increase
/// monotonically and deleted tracks move to the retired list.
#[derive(Debug)]
pub(crate) struct TrackStore {
    pub kf: KalmanFilter,
    pub live: Vec<Track>,
    pub retired: Vec<Track>,
    next_id: u64,
    last_frame: u32,
}

impl TrackStore {
    pub fn new(kf: KalmanFilter) -> Self {
        Self {
            kf,
            live: Vec::new(),
            retired: Vec::new(),
            next_id: 1,
            last_frame: 0,
        }
    }

    /// Validate the step frame and coast every live track up to it, aging
    /// once per skipped frame.
    pub fn advance_to(&mut self, frame: u32, detections: &[Detection]) -> Result<(), TrackerError> {
        if frame <= self.last_frame {
            return Err(TrackerError::FrameRegression {
                last: self.last_frame,
                got: frame,
            });
        }
        for (index, d) in detections.iter().enumerate() {
            if d.frame != frame {
                return Err(TrackerError::WrongFrame {
                    index,
                    frame: d.frame,
                    expected: frame,
                });
            }
        }
        let steps = frame - self.last_frame;
        for _ in 0..steps {
            for track in &mut self.live {
                track.kalman = self.kf.predict(&track.kalman);
                track.age += 1;
                track.time_since_update += 1;
            }
        }
        self.last_frame = frame;
        Ok(())
    }

    /// Update a matched track with a detection and record the observation.
    pub fn apply_match(
        &mut self,
        track_index: usize,
        frame: u32,
        detection: &Detection,
        detection_index: usize,
        gallery_budget: Option<usize>,
    ) -> Result<(), TrackerError> {
        let track = &mut self.live[track_index];
        track.kalman = self
            .kf
            .update(&track.kalman, &bbox_to_measurement(&detection.bbox))?;
        track.hits += 1;
        track.time_since_update = 0;
        let posterior = track.kalman.to_bbox().unwrap_or(detection.bbox);
        track.observations.push(Observation {
            frame,
            detection_box: detection.bbox,
            posterior_box: posterior,
            detection_index,
        });
        if let (Some(budget), Some(feature)) = (gallery_budget, &detection.feature) {
            track.push_feature(feature.clone(), budget);
        }
        Ok(())
    }

    /// Create a Tentative track from an unmatched detection.
    pub fn spawn(
        &mut self,
        frame: u32,
        detection: &Detection,
        detection_index: usize,
        gallery_budget: Option<usize>,
        oracle_identity: Option<u32>,
    ) -> Result<TrackId, TrackerError> {
        let state = self.kf.initiate(&bbox_to_measurement(&detection.bbox))?;
        let id = TrackId(self.next_id);
        self.next_id += 1;
        let mut track = Track::new(id, state);
        track.oracle_identity = oracle_identity;
        track.observations.push(Observation {
            frame,
            detection_box: detection.bbox,
            posterior_box: detection.bbox,
            detection_index,
        });
        if let (Some(budget), Some(feature)) = (gallery_budget, &detection.feature) {
            track.push_feature(feature.clone(), budget);
        }
        self.live.push(track);
        Ok(id)
    }

    /// Apply the lifecycle rules at the end of a step: confirm tracks that
    /// reached `min_hits`, retire tracks unmatched for more than `max_age`.
    pub fn finalize_frame(&mut self, max_age: u32, min_hits: u32) {
        for track in &mut self.live {
            if track.state == TrackState::Tentative && track.hits >= min_hits {
                track.confirm();
            }
            if track.time_since_update > max_age {
                track.delete();
            }
        }
        let mut i = 0;
        while i < self.live.len() {
            if self.live[i].is_deleted() {
                let track = self.live.remove(i);
                self.retired.push(track);
            } else {
                i += 1;
            }
        }
    }

    /// Predicted box per live track; `None` when the state degenerated.
    pub fn predicted_boxes(&self) -> Vec<Option<crate::bbox::BBox>> {
        self.live.iter().map(|t| t.kalman.to_bbox()).collect()
    }

    /// All tracks, live and retired, sorted by id.
    pub fn into_tracks(mut self) -> Vec<Track> {
        self.retired.append(&mut self.live);
        self.retired.sort_by_key(|t| t.id);
        self.retired
    }
}

/// IoU association cost between a predicted box and a detection;
/// degenerate predictions can never match.
pub(crate) fn iou_cost(predicted: &Option<crate::bbox::BBox>, detection: &Detection) -> f64 {
    match predicted {
        Some(p) => 1.0 - iou(p, &detection.bbox),
        None => INFEASIBLE_COST,
    }
}

/// Emit the observations of every track that ever reached Confirmed.
/// Tentative-phase observations are included retroactively; tracks that died
/// Tentative emit nothing. `raw_boxes` selects the raw detection box over the
/// Kalman posterior.
pub fn collect_tracked_boxes(tracks: &[Track], raw_boxes: bool) -> Vec<TrackedBox> {
    let mut out = Vec::new();
    for track in tracks {
        if !track.was_confirmed() {
            continue;
        }
        for obs in &track.observations {
            out.push(TrackedBox {
                frame: obs.frame,
                id: track.id.0,
                bbox: if raw_boxes {
                    obs.detection_box
                } else {
                    obs.posterior_box
                },
            });
        }
    }
    out.sort_by_key(|b| (b.frame, b.id));
    out
}
