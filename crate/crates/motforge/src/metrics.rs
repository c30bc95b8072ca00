//! CLEAR-MOT and identity metrics.
//!
//! `clear_mot` follows benchmark semantics: correspondences persist from
//! frame to frame while the pair still overlaps, remaining boxes are matched
//! optimally on IoU cost, and an ID switch is counted whenever a ground-truth
//! identity's matched prediction id differs from its last matched id.
//!
//! `identity_metrics` solves the global one-to-one trajectory matching that
//! maximizes frame overlap, padded to square with dummies so unmatched
//! trajectories are representable, and derives IDF1/IDP/IDR from the matched
//! frame count.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use thiserror::Error;

use crate::assign::{solve_optimal, AssignError, CostMatrix};
use crate::bbox::{iou, BBox};
use crate::motio::{GtRecord, TrackedBox};

pub const DEFAULT_IOU_MIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction id {id} appears twice in frame {frame}")]
    DuplicatePrediction { frame: u32, id: u64 },
    #[error("ground-truth identity {identity} appears twice in frame {frame}")]
    DuplicateGroundTruth { frame: u32, identity: u32 },
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw counts of one evaluation; the aggregation monoid. Ratios are always
/// derived from summed counts, never averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub gt_count: u64,
    pub pred_count: u64,
    pub matched_count: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub idtp: u64,
}

impl EvalCounts {
    pub fn mota(&self) -> f64 {
        let errors = (self.false_negatives + self.false_positives + self.id_switches) as f64;
        1.0 - errors / self.gt_count.max(1) as f64
    }

    pub fn idfp(&self) -> u64 {
        self.pred_count - self.idtp
    }

    pub fn idfn(&self) -> u64 {
        self.gt_count - self.idtp
    }

    pub fn idf1(&self) -> f64 {
        let denom = (2 * self.idtp + self.idfp() + self.idfn()) as f64;
        if denom == 0.0 {
            1.0
        } else {
            2.0 * self.idtp as f64 / denom
        }
    }

    pub fn idp(&self) -> f64 {
        if self.pred_count == 0 {
            1.0
        } else {
            self.idtp as f64 / self.pred_count as f64
        }
    }

    pub fn idr(&self) -> f64 {
        if self.gt_count == 0 {
            1.0
        } else {
            self.idtp as f64 / self.gt_count as f64
        }
    }

    pub fn accumulate(&mut self, other: &EvalCounts) {
        self.gt_count += other.gt_count;
        self.pred_count += other.pred_count;
        self.matched_count += other.matched_count;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.id_switches += other.id_switches;
        self.idtp += other.idtp;
    }
}

/// Output of [`clear_mot`]: counts plus the per-frame match trace.
#[derive(Debug, Clone)]
pub struct ClearMotResult {
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub gt_count: u64,
    pub pred_count: u64,
    pub matched_count: u64,
    pub mota: f64,
    /// `(frame, [(gt identity, prediction id)])` for every evaluated frame.
    pub frame_trace: Vec<(u32, Vec<(u32, u64)>)>,
}

/// Output of [`identity_metrics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResult {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
}

fn group_gt(gt: &[GtRecord]) -> Result<BTreeMap<u32, Vec<(u32, BBox)>>, MetricsError> {
    let mut by_frame: BTreeMap<u32, Vec<(u32, BBox)>> = BTreeMap::new();
    for g in gt {
        let rows = by_frame.entry(g.frame).or_default();
        if rows.iter().any(|(id, _)| *id == g.identity) {
            return Err(MetricsError::DuplicateGroundTruth {
                frame: g.frame,
                identity: g.identity,
            });
        }
        rows.push((g.identity, g.bbox));
    }
    Ok(by_frame)
}

fn group_preds(preds: &[TrackedBox]) -> Result<BTreeMap<u32, Vec<(u64, BBox)>>, MetricsError> {
    let mut by_frame: BTreeMap<u32, Vec<(u64, BBox)>> = BTreeMap::new();
    for p in preds {
        let rows = by_frame.entry(p.frame).or_default();
        if rows.iter().any(|(id, _)| *id == p.id) {
            return Err(MetricsError::DuplicatePrediction {
                frame: p.frame,
                id: p.id,
            });
        }
        rows.push((p.id, p.bbox));
    }
    Ok(by_frame)
}

pub fn clear_mot(
    gt: &[GtRecord],
    predictions: &[TrackedBox],
    iou_min: f64,
) -> Result<ClearMotResult, MetricsError> {
    let gt_frames = group_gt(gt)?;
    let pred_frames = group_preds(predictions)?;
    // IoU == iou_min must remain feasible; the solver excludes cost >= the
    // threshold, so nudge it one ulp up.
    let cost_threshold = (1.0 - iou_min).next_up();

    let mut correspondence: HashMap<u32, u64> = HashMap::new();
    let mut last_matched: HashMap<u32, u64> = HashMap::new();
    let mut fp = 0u64;
    let mut misses = 0u64;
    let mut idsw = 0u64;
    let mut matched_count = 0u64;
    let mut frame_trace = Vec::new();

    let mut frames: Vec<u32> = gt_frames
        .keys()
        .chain(pred_frames.keys())
        .copied()
        .collect();
    frames.sort_unstable();
    frames.dedup();

    let empty_gt: Vec<(u32, BBox)> = Vec::new();
    let empty_pred: Vec<(u64, BBox)> = Vec::new();
    for frame in frames {
        let gts = gt_frames.get(&frame).unwrap_or(&empty_gt);
        let preds = pred_frames.get(&frame).unwrap_or(&empty_pred);

        let mut gt_free: Vec<usize> = Vec::new();
        let mut pred_free: Vec<usize> = (0..preds.len()).collect();
        let mut matches: Vec<(u32, u64)> = Vec::new();

        // Persist still-valid correspondences before optimal matching.
        for (gi, &(gid, gbox)) in gts.iter().enumerate() {
            let kept = correspondence.get(&gid).copied().and_then(|pid| {
                pred_free
                    .iter()
                    .position(|&pi| preds[pi].0 == pid)
                    .filter(|&pos| iou(&gbox, &preds[pred_free[pos]].1) >= iou_min)
            });
            match kept {
                Some(pos) => {
                    let pi = pred_free.remove(pos);
                    matches.push((gid, preds[pi].0));
                }
                None => gt_free.push(gi),
            }
        }

        // Optimal matching on the remainder.
        if !gt_free.is_empty() && !pred_free.is_empty() {
            let cost = CostMatrix::from_fn(gt_free.len(), pred_free.len(), |r, c| {
                1.0 - iou(&gts[gt_free[r]].1, &preds[pred_free[c]].1)
            });
            let result = solve_optimal(&cost, cost_threshold)?;
            let mut gt_used = vec![false; gt_free.len()];
            let mut pred_used = vec![false; pred_free.len()];
            for &(r, c) in &result.matches {
                matches.push((gts[gt_free[r]].0, preds[pred_free[c]].0));
                gt_used[r] = true;
                pred_used[c] = true;
            }
            gt_free = gt_free
                .iter()
                .enumerate()
                .filter(|(i, _)| !gt_used[*i])
                .map(|(_, &g)| g)
                .collect();
            pred_free = pred_free
                .iter()
                .enumerate()
                .filter(|(i, _)| !pred_used[*i])
                .map(|(_, &p)| p)
                .collect();
        }

        for &(gid, pid) in &matches {
            if let Some(&prev) = last_matched.get(&gid) {
                if prev != pid {
                    idsw += 1;
                }
            }
            last_matched.insert(gid, pid);
            correspondence.insert(gid, pid);
        }
        matched_count += matches.len() as u64;
        misses += gt_free.len() as u64;
        fp += pred_free.len() as u64;
        matches.sort_unstable();
        frame_trace.push((frame, matches));
    }

    let counts = EvalCounts {
        gt_count: gt.len() as u64,
        pred_count: predictions.len() as u64,
        matched_count,
        false_positives: fp,
        false_negatives: misses,
        id_switches: idsw,
        idtp: 0,
    };
    Ok(ClearMotResult {
        false_positives: fp,
        false_negatives: misses,
        id_switches: idsw,
        gt_count: counts.gt_count,
        pred_count: counts.pred_count,
        matched_count,
        mota: counts.mota(),
        frame_trace,
    })
}

/// Per-pair overlap table between ground-truth and predicted trajectories.
#[derive(Debug, Clone)]
pub struct TrajectoryOverlaps {
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u64>,
    /// `table[g][p]`: frames where the pair overlaps at IoU >= `iou_min`.
    pub table: Vec<Vec<u64>>,
}

pub fn trajectory_overlaps(
    gt: &[GtRecord],
    predictions: &[TrackedBox],
    iou_min: f64,
) -> Result<TrajectoryOverlaps, MetricsError> {
    let mut gt_traj: BTreeMap<u32, BTreeMap<u32, BBox>> = BTreeMap::new();
    for g in gt {
        if gt_traj
            .entry(g.identity)
            .or_default()
            .insert(g.frame, g.bbox)
            .is_some()
        {
            return Err(MetricsError::DuplicateGroundTruth {
                frame: g.frame,
                identity: g.identity,
            });
        }
    }
    let mut pred_traj: BTreeMap<u64, BTreeMap<u32, BBox>> = BTreeMap::new();
    for p in predictions {
        if pred_traj
            .entry(p.id)
            .or_default()
            .insert(p.frame, p.bbox)
            .is_some()
        {
            return Err(MetricsError::DuplicatePrediction {
                frame: p.frame,
                id: p.id,
            });
        }
    }

    let gt_ids: Vec<u32> = gt_traj.keys().copied().collect();
    let pred_ids: Vec<u64> = pred_traj.keys().copied().collect();
    let mut overlaps = vec![vec![0u64; pred_ids.len()]; gt_ids.len()];
    for (i, gid) in gt_ids.iter().enumerate() {
        for (j, pid) in pred_ids.iter().enumerate() {
            let g = &gt_traj[gid];
            let p = &pred_traj[pid];
            let count = g
                .iter()
                .filter(|(frame, gbox)| p.get(frame).is_some_and(|pbox| iou(gbox, pbox) >= iou_min))
                .count();
            overlaps[i][j] = count as u64;
        }
    }
    Ok(TrajectoryOverlaps {
        gt_ids,
        pred_ids,
        table: overlaps,
    })
}

pub fn identity_metrics(
    gt: &[GtRecord],
    predictions: &[TrackedBox],
    iou_min: f64,
) -> Result<IdentityResult, MetricsError> {
    let overlaps = trajectory_overlaps(gt, predictions, iou_min)?;
    let (n_gt, n_pred) = (overlaps.gt_ids.len(), overlaps.pred_ids.len());

    // Square bipartite problem with dummies: every trajectory can stay
    // unmatched at zero overlap, so maximizing total overlap is exactly
    // minimizing IDFP + IDFN.
    let n = n_gt + n_pred;
    let idtp = if n == 0 {
        0
    } else {
        let cost = CostMatrix::from_fn(n, n, |r, c| {
            if r < n_gt && c < n_pred {
                -(overlaps.table[r][c] as f64)
            } else {
                0.0
            }
        });
        let result = solve_optimal(&cost, f64::INFINITY)?;
        result
            .matches
            .iter()
            .filter(|&&(r, c)| r < n_gt && c < n_pred)
            .map(|&(r, c)| overlaps.table[r][c])
            .sum()
    };

    let counts = EvalCounts {
        gt_count: gt.len() as u64,
        pred_count: predictions.len() as u64,
        idtp,
        ..EvalCounts::default()
    };
    Ok(IdentityResult {
        idtp,
        idfp: counts.idfp(),
        idfn: counts.idfn(),
        idf1: counts.idf1(),
        idp: counts.idp(),
        idr: counts.idr(),
    })
}

/// Evaluate one sequence: CLEAR-MOT counts plus identity counts.
pub fn evaluate(
    gt: &[GtRecord],
    predictions: &[TrackedBox],
    iou_min: f64,
) -> Result<EvalCounts, MetricsError> {
    let clear = clear_mot(gt, predictions, iou_min)?;
    let identity = identity_metrics(gt, predictions, iou_min)?;
    Ok(EvalCounts {
        gt_count: clear.gt_count,
        pred_count: clear.pred_count,
        matched_count: clear.matched_count,
        false_positives: clear.false_positives,
        false_negatives: clear.false_negatives,
        id_switches: clear.id_switches,
        idtp: identity.idtp,
    })
}

/// Per-sequence scores plus an aggregate computed by raw-count summation
/// (the benchmark convention).
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub sequences: Vec<(String, EvalCounts)>,
    pub overall: EvalCounts,
}

impl EvalReport {
    pub fn from_sequences(sequences: Vec<(String, EvalCounts)>) -> Self {
        let mut overall = EvalCounts::default();
        for (_, c) in &sequences {
            overall.accumulate(c);
        }
        Self { sequences, overall }
    }

    fn rows(&self) -> impl Iterator<Item = (&str, &EvalCounts)> {
        self.sequences
            .iter()
            .map(|(n, c)| (n.as_str(), c))
            .chain(std::iter::once(("OVERALL", &self.overall)))
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<(), MetricsError> {
        writeln!(w, "sequence,mota,idf1,idp,idr,fp,fn,idsw,gt,pred,idtp")?;
        for (name, c) in self.rows() {
            writeln!(
                w,
                "{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
                name,
                c.mota(),
                c.idf1(),
                c.idp(),
                c.idr(),
                c.false_positives,
                c.false_negatives,
                c.id_switches,
                c.gt_count,
                c.pred_count,
                c.idtp,
            )?;
        }
        Ok(())
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}\n",
            "sequence", "MOTA", "IDF1", "IDP", "IDR", "FP", "FN", "IDSW"
        ));
        for (name, c) in self.rows() {
            out.push_str(&format!(
                "{:<18} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>7} {:>7} {:>6}\n",
                name,
                100.0 * c.mota(),
                100.0 * c.idf1(),
                100.0 * c.idp(),
                100.0 * c.idr(),
                c.false_positives,
                c.false_negatives,
                c.id_switches,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(l: f64, t: f64) -> BBox {
        BBox::new(l, t, 10.0, 10.0).unwrap()
    }

    fn gt(frame: u32, identity: u32, l: f64, t: f64) -> GtRecord {
        GtRecord {
            frame,
            identity,
            bbox: bb(l, t),
            visibility: 1.0,
        }
    }

    fn pred(frame: u32, id: u64, l: f64, t: f64) -> TrackedBox {
        TrackedBox {
            frame,
            id,
            bbox: bb(l, t),
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, f as f64 * 3.0, 0.0)).collect();
        let preds: Vec<TrackedBox> = (1..=10).map(|f| pred(f, 5, f as f64 * 3.0, 0.0)).collect();
        let counts = evaluate(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(counts.mota(), 1.0);
        assert_eq!(counts.idf1(), 1.0);
        assert_eq!(counts.false_positives, 0);
        assert_eq!(counts.false_negatives, 0);
        assert_eq!(counts.id_switches, 0);
    }

    #[test]
    fn miss_spurious_switch_fixture_scores_point_seven() {
        // 10 GT boxes; predictions miss frame 10, add one far spurious box,
        // and switch identity once at frame 5.
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, 50.0, 50.0)).collect();
        let mut preds: Vec<TrackedBox> = Vec::new();
        for f in 1..=4 {
            preds.push(pred(f, 1, 50.0, 50.0));
        }
        for f in 5..=9 {
            preds.push(pred(f, 2, 50.0, 50.0));
        }
        preds.push(pred(1, 9, 400.0, 400.0));

        let clear = clear_mot(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(clear.false_negatives, 1);
        assert_eq!(clear.false_positives, 1);
        assert_eq!(clear.id_switches, 1);
        assert_eq!(clear.mota, 0.7);
    }

    #[test]
    fn empty_predictions_give_zero_mota() {
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, 50.0, 50.0)).collect();
        let clear = clear_mot(&gt_rows, &[], 0.5).unwrap();
        assert_eq!(clear.false_negatives, 10);
        assert_eq!(clear.mota, 0.0);
    }

    #[test]
    fn duplicate_prediction_id_in_frame_is_error() {
        let preds = vec![pred(1, 1, 0.0, 0.0), pred(1, 1, 30.0, 0.0)];
        assert!(matches!(
            clear_mot(&[], &preds, 0.5),
            Err(MetricsError::DuplicatePrediction { frame: 1, id: 1 })
        ));
    }

    #[test]
    fn persistence_prevents_spurious_switches() {
        // Two GT objects drift toward each other; persistence must keep the
        // original pairing rather than re-deriving one per frame.
        let mut gt_rows = Vec::new();
        let mut preds = Vec::new();
        for f in 1..=10u32 {
            let t = f as f64;
            gt_rows.push(gt(f, 1, 20.0 + t, 0.0));
            gt_rows.push(gt(f, 2, 40.0 - t, 0.0));
            preds.push(pred(f, 11, 20.0 + t, 0.0));
            preds.push(pred(f, 12, 40.0 - t, 0.0));
        }
        let clear = clear_mot(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(clear.id_switches, 0);
        assert_eq!(clear.mota, 1.0);
    }

    #[test]
    fn split_track_gives_half_idf1() {
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, 50.0, 50.0)).collect();
        let mut preds: Vec<TrackedBox> = Vec::new();
        for f in 1..=5 {
            preds.push(pred(f, 1, 50.0, 50.0));
        }
        for f in 6..=10 {
            preds.push(pred(f, 2, 50.0, 50.0));
        }
        let id = identity_metrics(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(id.idtp, 5);
        assert_eq!(id.idfp, 5);
        assert_eq!(id.idfn, 5);
        assert_eq!(id.idf1, 0.5);
    }

    #[test]
    fn swapped_labels_with_full_overlap_are_perfect() {
        let mut gt_rows = Vec::new();
        let mut preds = Vec::new();
        for f in 1..=8u32 {
            gt_rows.push(gt(f, 1, 0.0, 0.0));
            gt_rows.push(gt(f, 2, 100.0, 0.0));
            // Labels swapped, geometry exact.
            preds.push(pred(f, 2, 0.0, 0.0));
            preds.push(pred(f, 1, 100.0, 0.0));
        }
        let id = identity_metrics(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(id.idf1, 1.0);
    }

    #[test]
    fn non_overlapping_predictions_score_zero_idf1() {
        let gt_rows: Vec<GtRecord> = (1..=8).map(|f| gt(f, 1, 0.0, 0.0)).collect();
        let preds: Vec<TrackedBox> = (1..=8).map(|f| pred(f, 1, 300.0, 0.0)).collect();
        let id = identity_metrics(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(id.idtp, 0);
        assert_eq!(id.idf1, 0.0);
    }

    #[test]
    fn idf1_prefers_total_overlap_over_pair_count() {
        // Overlaps: g1-p1 = 10, g2-p1 = 2, g1-p2 = 2, g2-p2 = 0. The best
        // one-to-one matching is {g1-p1, g2-p2} with IDTP 10, not the
        // two-positive-pair alternative {g1-p2, g2-p1} with IDTP 4.
        let mut gt_rows = Vec::new();
        let mut preds = Vec::new();
        for f in 1..=10u32 {
            gt_rows.push(gt(f, 1, 0.0, 0.0));
            preds.push(pred(f, 1, 0.0, 0.0));
        }
        for f in 11..=12u32 {
            gt_rows.push(gt(f, 2, 50.0, 0.0));
            preds.push(pred(f, 1, 50.0, 0.0));
        }
        for f in 13..=14u32 {
            gt_rows.push(gt(f, 1, 80.0, 0.0));
            preds.push(pred(f, 2, 80.0, 0.0));
        }
        let id = identity_metrics(&gt_rows, &preds, 0.5).unwrap();
        assert_eq!(id.idtp, 10);
    }

    #[test]
    fn aggregation_is_ratio_invariant_for_identical_sequences() {
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, 50.0, 50.0)).collect();
        let preds: Vec<TrackedBox> = (1..=9).map(|f| pred(f, 1, 50.0, 50.0)).collect();
        let one = evaluate(&gt_rows, &preds, 0.5).unwrap();
        let report = EvalReport::from_sequences(vec![("a".into(), one), ("b".into(), one)]);
        assert_eq!(report.overall.mota(), one.mota());
        assert_eq!(report.overall.idf1(), one.idf1());
        assert_eq!(report.overall.gt_count, 2 * one.gt_count);
    }

    #[test]
    fn idf1_invariant_to_prediction_relabeling() {
        let gt_rows: Vec<GtRecord> = (1..=10).map(|f| gt(f, 1, 50.0, 50.0)).collect();
        let preds: Vec<TrackedBox> = (1..=10)
            .map(|f| pred(f, if f <= 6 { 3 } else { 8 }, 50.0, 50.0))
            .collect();
        let relabeled: Vec<TrackedBox> = preds
            .iter()
            .map(|p| TrackedBox {
                frame: p.frame,
                id: p.id * 977 + 5,
                bbox: p.bbox,
            })
            .collect();
        let a = identity_metrics(&gt_rows, &preds, 0.5).unwrap();
        let b = identity_metrics(&gt_rows, &relabeled, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_iou_boundary_is_inclusive() {
        // Boxes 10x10 shifted so IoU is exactly 1/3 with iou_min 1/3.
        let gt_rows = vec![gt(1, 1, 0.0, 0.0)];
        let preds = vec![pred(1, 1, 5.0, 0.0)];
        let clear = clear_mot(&gt_rows, &preds, 1.0 / 3.0).unwrap();
        assert_eq!(clear.matched_count, 1);
    }
}
