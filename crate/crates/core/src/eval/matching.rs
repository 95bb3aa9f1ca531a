//! Per-image greedy matching and the 101-point interpolated AP.

use serde::{Deserialize, Serialize};

/// Boxes here are COCO `[x, y, w, h]`.
pub type Xywh = [f64; 4];

/// Intersection over union of two `[x, y, w, h]` boxes; 0 for an empty union.
pub fn iou(a: &Xywh, b: &Xywh) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Outcome of one detection after matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetOutcome {
    TruePositive,
    FalsePositive,
    /// Matched to an ignored ground truth, or unmatched and outside the area
    /// range: neither rewarded nor penalized.
    Ignored,
}

/// Matching result for one image at one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMatch {
    /// Per detection, in the order given.
    pub outcomes: Vec<DetOutcome>,
    /// Ground truth matched by each detection, if any.
    pub matched_gt: Vec<Option<usize>>,
    /// Per ground truth.
    pub gt_matched: Vec<bool>,
}

/// Greedy matching of `dets` (already in descending score order) to `gts`.
///
/// Each detection takes the unmatched ground truth with the highest IoU
/// `≥ t`, preferring non-ignored ones; IoU ties go to the lower gt index.
/// `det_ignored_if_unmatched[i]` marks detections outside the area range.
pub fn match_detections(
    dets: &[Xywh],
    gts: &[Xywh],
    gt_ignored: &[bool],
    det_ignored_if_unmatched: &[bool],
    t: f64,
) -> ImageMatch {
    let mut gt_matched = vec![false; gts.len()];
    let mut outcomes = Vec::with_capacity(dets.len());
    let mut matched_gt = Vec::with_capacity(dets.len());
    for (di, d) in dets.iter().enumerate() {
        // (ignored, -iou, index) lexicographic minimum among candidates
        let mut best: Option<(bool, f64, usize)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if gt_matched[gi] {
                continue;
            }
            let v = iou(d, g);
            if v < t {
                continue;
            }
            let cand = (gt_ignored[gi], v, gi);
            let better = match best {
                None => true,
                Some((bi, bv, _)) => (!cand.0 && bi) || (cand.0 == bi && v > bv),
            };
            if better {
                best = Some(cand);
            }
        }
        match best {
            Some((ignored, _, gi)) => {
                gt_matched[gi] = true;
                matched_gt.push(Some(gi));
                outcomes.push(if ignored { DetOutcome::Ignored } else { DetOutcome::TruePositive });
            }
            None => {
                matched_gt.push(None);
                outcomes.push(if det_ignored_if_unmatched[di] {
                    DetOutcome::Ignored
                } else {
                    DetOutcome::FalsePositive
                });
            }
        }
    }
    ImageMatch { outcomes, matched_gt, gt_matched }
}

/// Number of recall grid points.
pub const RECALL_POINTS: usize = 101;

/// Interpolated precision on the recall grid `0.00, 0.01, …, 1.00`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
}

impl PrCurve {
    pub fn recall_grid() -> Vec<f64> {
        (0..RECALL_POINTS).map(|i| i as f64 / 100.0).collect()
    }

    /// Mean interpolated precision over the grid.
    pub fn average_precision(&self) -> f64 {
        self.precision.iter().sum::<f64>() / RECALL_POINTS as f64
    }
}

/// AP, final recall and the interpolated curve for a pooled, score-ordered
/// sequence of true/false positives (`true` = TP) against `n_gt` ground
/// truths. `None` when `n_gt == 0`.
pub fn ap_at_threshold(tp_flags: &[bool], n_gt: usize) -> Option<(f64, f64, PrCurve)> {
    if n_gt == 0 {
        return None;
    }
    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut precision = Vec::with_capacity(tp_flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &f in tp_flags {
        if f {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // envelope: best precision at this recall or beyond
    for i in (0..precision.len().saturating_sub(1)).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    let curve = PrCurve {
        precision: PrCurve::recall_grid()
            .iter()
            .map(|&r| {
                let idx = recall.partition_point(|&x| x < r);
                precision.get(idx).copied().unwrap_or(0.0)
            })
            .collect(),
    };
    let final_recall = recall.last().copied().unwrap_or(0.0);
    Some((curve.average_precision(), final_recall, curve))
}
