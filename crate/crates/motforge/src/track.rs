//! Track state owned by the frame-by-frame trackers.

use std::collections::VecDeque;
use std::fmt;

use crate::bbox::BBox;
use crate::detection::Feature;
use crate::kalman::KalmanState;

/// Sequence-unique track identifier. Ids start at 1 and are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Lifecycle of a track. Legal transitions: Tentative -> Confirmed,
/// Tentative -> Deleted, Confirmed -> Deleted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Deleted,
}

/// One matched frame of a track: the raw detection box, the Kalman posterior
/// box at the time of the match, and the index of the detection within its
/// frame.
#[derive(Debug, Clone)]
pub struct Observation {
    pub frame: u32,
    pub detection_box: BBox,
    pub posterior_box: BBox,
    pub detection_index: usize,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub state: TrackState,
    pub kalman: KalmanState,
    /// Total matched detections.
    pub hits: u32,
    /// Frames since creation.
    pub age: u32,
    /// Frames since the last matched detection; 0 immediately after a match.
    pub time_since_update: u32,
    /// Recent appearance features, newest last, bounded by the gallery budget.
    pub gallery: VecDeque<Feature>,
    /// Every matched frame, in order.
    pub observations: Vec<Observation>,
    /// Ground-truth identity for oracle tracking, when known.
    pub oracle_identity: Option<u32>,
    ever_confirmed: bool,
}

impl Track {
    pub fn new(id: TrackId, kalman: KalmanState) -> Self {
        Self {
            id,
            state: TrackState::Tentative,
            kalman,
            hits: 1,
            age: 0,
            time_since_update: 0,
            gallery: VecDeque::new(),
            observations: Vec::new(),
            oracle_identity: None,
            ever_confirmed: false,
        }
    }

    pub fn is_confirmed(&self) -> bool {
        self.state == TrackState::Confirmed
    }

    pub fn is_deleted(&self) -> bool {
        self.state == TrackState::Deleted
    }

    /// Whether the track was ever promoted out of Tentative; controls whether
    /// its observations are emitted to result files.
    pub fn was_confirmed(&self) -> bool {
        self.ever_confirmed
    }

    pub fn confirm(&mut self) {
        debug_assert_eq!(self.state, TrackState::Tentative);
        self.state = TrackState::Confirmed;
        self.ever_confirmed = true;
    }

    pub fn delete(&mut self) {
        debug_assert_ne!(self.state, TrackState::Deleted);
        self.state = TrackState::Deleted;
    }

    pub fn push_feature(&mut self, feature: Feature, budget: usize) {
        self.gallery.push_back(feature);
        while self.gallery.len() > budget {
            self.gallery.pop_front();
        }
    }

    /// Smallest cosine distance between the detection feature and any gallery
    /// entry; `None` for an empty gallery.
    pub fn appearance_distance(&self, feature: &Feature) -> Option<f64> {
        self.gallery
            .iter()
            .map(|g| g.cosine_distance(feature))
            .min_by(|a, b| a.partial_cmp(b).expect("finite distances"))
    }
}
