//! Oracle associator: resolves identity by ground truth, bounding the IDF1
//! achievable by any appearance model on the same detections.

use std::collections::HashMap;

use super::{iou_cost, SortConfig, TrackStore, TrackerError, INFEASIBLE_COST};
use crate::assign::{solve_optimal, CostMatrix};
use crate::bbox::iou;
use crate::detection::Detection;
use crate::kalman::KalmanFilter;
use crate::motio::GtRecord;
use crate::track::{Track, TrackId};

/// Annotate each detection with the ground-truth identity it overlaps best,
/// requiring IoU >= `iou_min`; `None` where nothing qualifies.
pub fn annotate_identities(
    detections: &[Detection],
    ground_truth: &[GtRecord],
    iou_min: f64,
) -> Vec<Option<u32>> {
    let mut gt_by_frame: HashMap<u32, Vec<&GtRecord>> = HashMap::new();
    for g in ground_truth {
        gt_by_frame.entry(g.frame).or_default().push(g);
    }
    detections
        .iter()
        .map(|d| {
            gt_by_frame
                .get(&d.frame)
                .and_then(|rows| {
                    rows.iter()
                        .map(|g| (iou(&g.bbox, &d.bbox), g.identity))
                        .filter(|(v, _)| *v >= iou_min)
                        .max_by(|a, b| a.0.partial_cmp(&b.0).expect("iou is finite"))
                })
                .map(|(_, id)| id)
        })
        .collect()
}

pub struct OracleTracker {
    lifecycle: SortConfig,
    store: TrackStore,
}

impl OracleTracker {
    pub fn new(lifecycle: SortConfig) -> Self {
        let kf = KalmanFilter::new(lifecycle.kalman);
        Self {
            lifecycle,
            store: TrackStore::new(kf),
        }
    }

    /// Advance one frame. `identities[i]` is the ground-truth identity of
    /// `detections[i]`, as produced by [`annotate_identities`].
    pub fn step(
        &mut self,
        frame: u32,
        detections: &[Detection],
        identities: &[Option<u32>],
    ) -> Result<Vec<Option<TrackId>>, TrackerError> {
        assert_eq!(detections.len(), identities.len());
        self.store.advance_to(frame, detections)?;

        let mut assigned: Vec<Option<TrackId>> = vec![None; detections.len()];
        let mut track_matched = vec![false; self.store.live.len()];
        let mut det_remaining: Vec<usize> = (0..detections.len()).collect();

        // Identity stage: a live track owning identity x takes the
        // best-overlapping detection labeled x, regardless of motion cost.
        let owner: HashMap<u32, usize> = self
            .store
            .live
            .iter()
            .enumerate()
            .filter_map(|(t, track)| track.oracle_identity.map(|id| (id, t)))
            .collect();
        let predicted = self.store.predicted_boxes();
        let mut claims: Vec<(usize, usize)> = Vec::new(); // (track, detection)
        for (&identity, &t) in &owner {
            let best = det_remaining
                .iter()
                .filter(|&&d| identities[d] == Some(identity))
                .map(|&d| {
                    let overlap = predicted[t]
                        .map(|p| iou(&p, &detections[d].bbox))
                        .unwrap_or(0.0);
                    (d, overlap)
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(b.0.cmp(&a.0)));
            if let Some((d, _)) = best {
                claims.push((t, d));
            }
        }
        claims.sort_unstable();
        for (t, d) in claims {
            self.store.apply_match(t, frame, &detections[d], d, None)?;
            assigned[d] = Some(self.store.live[t].id);
            track_matched[t] = true;
            det_remaining.retain(|&x| x != d);
        }

        // IoU fallback for identity-less detections and leftovers. A pair
        // with two known, different identities never matches.
        let fallback_tracks: Vec<usize> = (0..self.store.live.len())
            .filter(|&t| !track_matched[t])
            .collect();
        if !fallback_tracks.is_empty() && !det_remaining.is_empty() {
            let cost = CostMatrix::from_fn(fallback_tracks.len(), det_remaining.len(), |ti, dj| {
                let t = fallback_tracks[ti];
                let d = det_remaining[dj];
                match (self.store.live[t].oracle_identity, identities[d]) {
                    (Some(a), Some(b)) if a != b => INFEASIBLE_COST,
                    _ => iou_cost(&predicted[t], &detections[d]),
                }
            });
            let result = solve_optimal(&cost, self.lifecycle.iou_infeasible_above)?;
            let mut consumed = Vec::new();
            for &(ti, dj) in &result.matches {
                let t = fallback_tracks[ti];
                let d = det_remaining[dj];
                self.store.apply_match(t, frame, &detections[d], d, None)?;
                assigned[d] = Some(self.store.live[t].id);
                consumed.push(d);
                // A track of unknown identity adopts the detection's, unless
                // another live track already owns it.
                if let (None, Some(identity)) = (self.store.live[t].oracle_identity, identities[d])
                {
                    if !self
                        .store
                        .live
                        .iter()
                        .any(|x| x.oracle_identity == Some(identity))
                    {
                        self.store.live[t].oracle_identity = Some(identity);
                    }
                }
            }
            det_remaining.retain(|d| !consumed.contains(d));
        }

        for &d in &det_remaining {
            if detections[d].confidence >= self.lifecycle.confidence_min {
                // Spawn owning the identity only if it is free.
                let identity = identities[d].filter(|id| {
                    !self
                        .store
                        .live
                        .iter()
                        .any(|x| x.oracle_identity == Some(*id))
                });
                assigned[d] = Some(self.store.spawn(frame, &detections[d], d, None, identity)?);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::BBox;

    fn det(frame: u32, l: f64, t: f64) -> Detection {
        Detection::new(frame, BBox::new(l, t, 10.0, 20.0).unwrap(), 1.0)
    }

    fn gt(frame: u32, identity: u32, l: f64, t: f64) -> GtRecord {
        GtRecord {
            frame,
            identity,
            bbox: BBox::new(l, t, 10.0, 20.0).unwrap(),
            visibility: 1.0,
        }
    }

    #[test]
    fn annotation_picks_best_overlap_above_half() {
        let dets = vec![det(1, 0.0, 0.0), det(1, 100.0, 100.0)];
        let rows = vec![gt(1, 7, 1.0, 0.0), gt(1, 8, 4.0, 0.0)];
        let ids = annotate_identities(&dets, &rows, 0.5);
        assert_eq!(ids[0], Some(7));
        assert_eq!(ids[1], None);
    }

    #[test]
    fn identity_equality_survives_crossing_objects() {
        let lifecycle = SortConfig {
            min_hits: 1,
            ..SortConfig::default()
        };
        let mut tracker = OracleTracker::new(lifecycle);
        let mut first_ids = Vec::new();
        for frame in 1..=12u32 {
            let t = frame as f64;
            let dets = vec![
                det(frame, 10.0 + 4.0 * t, 50.0),
                det(frame, 70.0 - 4.0 * t, 50.0),
            ];
            let gt_rows = vec![
                gt(frame, 1, 10.0 + 4.0 * t, 50.0),
                gt(frame, 2, 70.0 - 4.0 * t, 50.0),
            ];
            let ids = annotate_identities(&dets, &gt_rows, 0.5);
            let out = tracker.step(frame, &dets, &ids).unwrap();
            if frame == 1 {
                first_ids = out.clone();
            } else {
                assert_eq!(out, first_ids, "identity switched at frame {frame}");
            }
        }
    }

    #[test]
    fn unlabeled_detection_falls_back_to_iou() {
        let lifecycle = SortConfig {
            min_hits: 1,
            ..SortConfig::default()
        };
        let mut tracker = OracleTracker::new(lifecycle);
        let ids = tracker.step(1, &[det(1, 50.0, 50.0)], &[None]).unwrap();
        assert!(ids[0].is_some());
        // Next frame, still unlabeled, nearly same place: IoU keeps the id.
        let ids2 = tracker.step(2, &[det(2, 51.0, 50.0)], &[None]).unwrap();
        assert_eq!(ids2[0], ids[0]);
    }
}
