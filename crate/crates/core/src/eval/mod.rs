//! COCO-style scoring: per-threshold AP on the 101-point recall grid,
//! recall at a detection cap, means over thresholds, and area-binned
//! variants, plus the ground-truth area histogram.

mod matching;
mod report;

pub use matching::{ap_at_threshold, iou, match_detections, DetOutcome, ImageMatch, PrCurve, Xywh, RECALL_POINTS};
pub use report::{format_report, histogram_csv, REPORT_THRESHOLDS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{CocoDataset, CocoDetection, NODULE_CATEGORY_ID};

/// Area bin names in report order; `all` is the unfiltered set.
pub const BIN_NAMES: [&str; 4] = ["small", "medium", "large", "all"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    /// Upper bounds (inclusive) of `small` and `medium`, in px². Empty means
    /// tertiles of the evaluated ground-truth areas.
    pub area_cuts: Vec<f64>,
    pub max_detections: usize,
    pub histogram_bin_width: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_thresholds: default_thresholds(),
            area_cuts: Vec::new(),
            max_detections: 100,
            histogram_bin_width: 25.0,
        }
    }
}

/// `0.50, 0.55, …, 0.95`.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.iou_thresholds;
        if t.is_empty() || t.iter().any(|&v| !(v > 0.0 && v < 1.0)) || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "eval: iou_thresholds must be strictly increasing in (0, 1)".into(),
            ));
        }
        match self.area_cuts.as_slice() {
            [] => {}
            [a, b] if *a > 0.0 && a < b => {}
            c => return Err(Error::Config(format!("eval: area_cuts {c:?} must be two increasing positive bounds"))),
        }
        if self.max_detections == 0 {
            return Err(Error::Config("eval: max_detections must be at least 1".into()));
        }
        if !(self.histogram_bin_width > 0.0) {
            return Err(Error::Config("eval: histogram_bin_width must be positive".into()));
        }
        Ok(())
    }
}

/// Nearest-rank tertiles `sorted[⌈k·n/3⌉ − 1]` for `k = 1, 2`.
pub fn tertile_cuts(areas: &[f64]) -> Option<[f64; 2]> {
    if areas.is_empty() {
        return None;
    }
    let mut s = areas.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let rank = |k: usize| s[(k * n).div_ceil(3) - 1];
    Some([rank(1), rank(2)])
}

/// Closed-above area range; a value on a shared boundary belongs to the
/// lower bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaRange {
    pub lo: f64,
    pub hi: f64,
    /// Whether `lo` itself is excluded (true for every bin but the first).
    pub lo_open: bool,
}

impl Default for AreaRange {
    fn default() -> Self {
        AreaRange::ALL
    }
}

impl AreaRange {
    pub const ALL: AreaRange = AreaRange { lo: 0.0, hi: f64::INFINITY, lo_open: false };
    pub const EMPTY: AreaRange = AreaRange { lo: 0.0, hi: 0.0, lo_open: true };

    pub fn contains(&self, area: f64) -> bool {
        let above = if self.lo_open { area > self.lo } else { area >= self.lo };
        above && area <= self.hi
    }
}

/// Ranges for small, medium, large, all.
pub fn area_ranges(cuts: [f64; 2]) -> [AreaRange; 4] {
    [
        AreaRange { lo: 0.0, hi: cuts[0], lo_open: false },
        AreaRange { lo: cuts[0], hi: cuts[1], lo_open: true },
        AreaRange { lo: cuts[1], hi: f64::INFINITY, lo_open: true },
        AreaRange::ALL,
    ]
}

/// Index of the named bin (0..3) an area falls in.
pub fn bin_of(area: f64, cuts: [f64; 2]) -> usize {
    area_ranges(cuts)[..3]
        .iter()
        .position(|r| r.contains(area))
        .unwrap_or(2)
}

/// Ground truths and detections of one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImageInstances {
    pub image_id: u64,
    pub gts: Vec<Xywh>,
    pub gt_areas: Vec<f64>,
    pub dets: Vec<(Xywh, f64)>,
}

/// Scores for one area bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinResult {
    pub gt_count: usize,
    #[serde(skip)]
    pub range: AreaRange,
    /// `AP_t` per threshold; `None` when the bin has no ground truth.
    pub ap: Vec<Option<f64>>,
    /// `R_{t,D}` per threshold.
    pub recall: Vec<Option<f64>>,
    pub map: Option<f64>,
    pub mar: Option<f64>,
    #[serde(skip)]
    pub curves: Vec<Option<PrCurve>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou_thresholds: Vec<f64>,
    pub max_detections: usize,
    pub area_cuts: Option<[f64; 2]>,
    pub bins: BTreeMap<String, BinResult>,
    pub map: Option<f64>,
    pub mar: Option<f64>,
}

impl EvalResult {
    pub fn bin(&self, name: &str) -> &BinResult {
        &self.bins[name]
    }
}

fn mean(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() || v.len() != values.len() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// mAP and AR over per-threshold values, as `(mean AP, mean recall)`.
pub fn aggregate(ap: &[Option<f64>], recall: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    (mean(ap), mean(recall))
}

/// Evaluate one area range over all images at every threshold.
pub fn evaluate_range(images: &[ImageInstances], range: AreaRange, cfg: &EvalConfig) -> BinResult {
    let mut per_image: Vec<(u64, Vec<usize>, Vec<bool>, Vec<bool>)> = Vec::with_capacity(images.len());
    let mut n_gt = 0;
    for im in images {
        let order = det_order(&im.dets, cfg.max_detections);
        let gt_ignored: Vec<bool> = im.gt_areas.iter().map(|&a| !range.contains(a)).collect();
        let det_out: Vec<bool> = order
            .iter()
            .map(|&i| !range.contains(im.dets[i].0[2] * im.dets[i].0[3]))
            .collect();
        n_gt += gt_ignored.iter().filter(|&&g| !g).count();
        per_image.push((im.image_id, order, gt_ignored, det_out));
    }
    let mut ap = Vec::new();
    let mut recall = Vec::new();
    let mut curves = Vec::new();
    for &t in &cfg.iou_thresholds {
        // (score, image id, detection index, is true positive)
        let mut pooled: Vec<(f64, u64, usize, bool)> = Vec::new();
        for (im, (id, order, gt_ignored, det_out)) in images.iter().zip(&per_image) {
            let boxes: Vec<Xywh> = order.iter().map(|&i| im.dets[i].0).collect();
            let m = match_detections(&boxes, &im.gts, gt_ignored, det_out, t);
            for (k, o) in m.outcomes.iter().enumerate() {
                if *o != DetOutcome::Ignored {
                    let di = order[k];
                    pooled.push((im.dets[di].1, *id, di, *o == DetOutcome::TruePositive));
                }
            }
        }
        pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let flags: Vec<bool> = pooled.iter().map(|p| p.3).collect();
        match ap_at_threshold(&flags, n_gt) {
            Some((a, r, c)) => {
                ap.push(Some(a));
                recall.push(Some(r));
                curves.push(Some(c));
            }
            None => {
                ap.push(None);
                recall.push(None);
                curves.push(None);
            }
        }
    }
    let (map, mar) = aggregate(&ap, &recall);
    BinResult { gt_count: n_gt, range, ap, recall, map, mar, curves }
}

/// Detection indices of one image by descending score (ties to the lower
/// index), truncated to `max_det`.
fn det_order(dets: &[(Xywh, f64)], max_det: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| dets[b].1.total_cmp(&dets[a].1).then(a.cmp(&b)));
    idx.truncate(max_det);
    idx
}

/// Evaluate prepared instances. Cuts come from the config, or tertiles of
/// all ground-truth areas.
pub fn evaluate_instances(images: &[ImageInstances], cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let all_areas: Vec<f64> = images.iter().flat_map(|im| im.gt_areas.iter().copied()).collect();
    let cuts = match cfg.area_cuts.as_slice() {
        [a, b] => Some([*a, *b]),
        _ => tertile_cuts(&all_areas),
    };
    let ranges = match cuts {
        Some(c) => area_ranges(c),
        // no ground truth at all: every named bin is empty
        None => [AreaRange::EMPTY, AreaRange::EMPTY, AreaRange::EMPTY, AreaRange::ALL],
    };
    let mut bins = BTreeMap::new();
    for (name, range) in BIN_NAMES.iter().zip(ranges) {
        bins.insert(name.to_string(), evaluate_range(images, range, cfg));
    }
    let (map, mar) = (bins["all"].map, bins["all"].mar);
    Ok(EvalResult {
        iou_thresholds: cfg.iou_thresholds.clone(),
        max_detections: cfg.max_detections,
        area_cuts: cuts,
        bins,
        map,
        mar,
    })
}

/// Group a dataset and results file per image after checking that every
/// detection references a known image and the nodule category.
pub fn collect_instances(gt: &CocoDataset, dets: &[CocoDetection]) -> Result<Vec<ImageInstances>> {
    let mut by_id: BTreeMap<u64, ImageInstances> = gt
        .images
        .iter()
        .map(|im| (im.id, ImageInstances { image_id: im.id, ..Default::default() }))
        .collect();
    for a in gt.annotations.iter().filter(|a| a.iscrowd == 0) {
        let im = by_id.get_mut(&a.image_id).ok_or_else(|| {
            Error::Consistency(format!("annotation {} references unknown image {}", a.id, a.image_id))
        })?;
        im.gts.push(a.bbox);
        im.gt_areas.push(a.area);
    }
    for (i, d) in dets.iter().enumerate() {
        if d.category_id != NODULE_CATEGORY_ID {
            return Err(Error::Consistency(format!(
                "detection {i} has category {}, dataset has only {NODULE_CATEGORY_ID}",
                d.category_id
            )));
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::Consistency(format!("detection {i} score {} outside [0, 1]", d.score)));
        }
        let im = by_id.get_mut(&d.image_id).ok_or_else(|| {
            Error::Consistency(format!("detection {i} references image id {} not in ground truth", d.image_id))
        })?;
        im.dets.push((d.bbox, d.score));
    }
    Ok(by_id.into_values().collect())
}

pub fn evaluate(gt: &CocoDataset, dets: &[CocoDetection], cfg: &EvalConfig) -> Result<EvalResult> {
    evaluate_instances(&collect_instances(gt, dets)?, cfg)
}

/// Counts per bucket `⌊area / width⌋`, contiguous from the lowest to the
/// highest occupied bucket, as `(bucket start, count)`.
pub fn area_histogram(areas: &[f64], width: f64) -> Result<Vec<(f64, usize)>> {
    if !(width > 0.0) {
        return Err(Error::Config(format!("histogram bin width {width} must be positive")));
    }
    let buckets: Vec<i64> = areas.iter().map(|&a| (a / width).floor() as i64).collect();
    let (Some(&lo), Some(&hi)) = (buckets.iter().min(), buckets.iter().max()) else {
        return Ok(Vec::new());
    };
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for b in buckets {
        counts[(b - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| ((lo + k as i64) as f64 * width, c))
        .collect())
}
