//! Tracklet pseudo-label generation: run the appearance-free tracker over
//! each video independently and give every surviving tracklet its own class.
//! Labels are noisy by construction (a fragmented identity becomes several
//! classes); no label ever spans two videos or two tracklets.

use std::collections::BTreeMap;

use crate::detection::Detection;
use crate::motio::{LabelDataset, LabelRecord, SequenceBundle};
use crate::trackers::{annotate_identities, SortConfig, SortTracker, TrackerError};

fn detections_by_frame(bundle: &SequenceBundle) -> BTreeMap<u32, Vec<Detection>> {
    let mut by_frame: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in &bundle.detections {
        by_frame.entry(d.frame).or_default().push(d.clone());
    }
    by_frame
}

/// Run SORT over every sequence and label each surviving tracklet of at
/// least `min_tracklet_length` observations with a fresh class id. Record
/// features are the raw detection features, when present.
pub fn generate_labels(
    sequences: &[SequenceBundle],
    sort_config: &SortConfig,
    min_tracklet_length: usize,
) -> Result<LabelDataset, TrackerError> {
    let mut records = Vec::new();
    let mut next_label = 0u32;

    for bundle in sequences {
        let by_frame = detections_by_frame(bundle);
        let mut tracker = SortTracker::new(sort_config.clone());
        let empty: Vec<Detection> = Vec::new();
        for frame in 1..=bundle.frame_count {
            let dets = by_frame.get(&frame).unwrap_or(&empty);
            tracker.step(frame, dets)?;
        }

        for track in tracker.finish() {
            if !track.was_confirmed() || track.observations.len() < min_tracklet_length {
                continue;
            }
            let label = next_label;
            next_label += 1;
            for obs in &track.observations {
                let feature = by_frame
                    .get(&obs.frame)
                    .and_then(|dets| dets.get(obs.detection_index))
                    .and_then(|d| d.feature.clone());
                records.push(LabelRecord {
                    video_id: bundle.name.clone(),
                    label,
                    frame: obs.frame,
                    bbox: obs.detection_box,
                    feature,
                });
            }
        }
    }
    Ok(LabelDataset { records })
}

/// Supervised counterpart: label detections by the ground-truth identity
/// they overlap best (IoU >= `iou_min`), one class per (video, identity),
/// dropping unmatched detections and classes smaller than `min_class_size`.
pub fn labels_from_ground_truth(
    sequences: &[SequenceBundle],
    iou_min: f64,
    min_class_size: usize,
) -> LabelDataset {
    let mut records = Vec::new();
    let mut next_label = 0u32;
    for bundle in sequences {
        let Some(gt) = &bundle.ground_truth else {
            continue;
        };
        let identities = annotate_identities(&bundle.detections, gt, iou_min);
        let mut by_identity: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, identity) in identities.iter().enumerate() {
            if let Some(id) = identity {
                by_identity.entry(*id).or_default().push(i);
            }
        }
        for (_, members) in by_identity {
            if members.len() < min_class_size {
                continue;
            }
            let label = next_label;
            next_label += 1;
            for i in members {
                let d = &bundle.detections[i];
                records.push(LabelRecord {
                    video_id: bundle.name.clone(),
                    label,
                    frame: d.frame,
                    bbox: d.bbox,
                    feature: d.feature.clone(),
                });
            }
        }
    }
    LabelDataset { records }
}
