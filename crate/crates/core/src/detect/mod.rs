//! Two-stage detector on top of the pyramid: anchors, RPN, proposal
//! selection, multi-scale RoIAlign, box head and final NMS.

mod anchors;
mod boxes;
mod head;
mod roi;
mod rpn;

pub use anchors::generate_anchors;
pub use boxes::{argsort_desc, box_iou, decode_deltas, encode_deltas, nms, Box2, DELTA_CLAMP};
pub use head::{box_head_forward, postprocess, HeadOutput, MIN_BOX_SIDE, NUM_CLASSES};
pub use roi::{assign_level, bilinear, roi_align};
pub use rpn::{pyramid_anchors, rpn_forward, select_from_pool, select_proposals, Proposal, RpnLevel, ScoredLevel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpn::{build_pyramid, FeaturePyramid};
use crate::json::round6;
use crate::preprocess::CocoDetection;
use crate::swin::{swin_forward, SwinConfig};
use crate::tensor::{dims3, Tensor};
use crate::weights::{ParamSpec, Weights};

/// Lowest and highest pyramid level RoIs are pooled from.
pub const ROI_LEVELS: (usize, usize) = (2, 5);

/// Detector hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// One anchor size per pyramid level, P2 first.
    pub anchor_sizes: Vec<f32>,
    /// Height/width ratios.
    pub aspect_ratios: Vec<f32>,
    pub pre_nms_topk: usize,
    pub rpn_nms_iou: f32,
    pub post_nms_topk: usize,
    pub roi_output: usize,
    pub sampling_ratio: usize,
    pub score_thresh: f32,
    pub final_nms_iou: f32,
    pub level_k0: f64,
    pub canonical_size: f64,
    pub fpn_channels: usize,
    pub representation_size: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            anchor_sizes: vec![32.0, 64.0, 128.0, 256.0, 512.0],
            aspect_ratios: vec![0.5, 1.0, 2.0],
            pre_nms_topk: 1000,
            rpn_nms_iou: 0.7,
            post_nms_topk: 1000,
            roi_output: 7,
            sampling_ratio: 2,
            score_thresh: 0.05,
            final_nms_iou: 0.5,
            level_k0: 4.0,
            canonical_size: 224.0,
            fpn_channels: 256,
            representation_size: 1024,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("detector: {m}")));
        if self.anchor_sizes.len() != 5 || self.anchor_sizes.iter().any(|&s| !(s > 0.0)) {
            return bad("anchor_sizes must hold five positive sizes (P2..P6)");
        }
        if self.aspect_ratios.is_empty() || self.aspect_ratios.iter().any(|&r| !(r > 0.0)) {
            return bad("aspect_ratios must be positive");
        }
        for (name, t) in [
            ("rpn_nms_iou", self.rpn_nms_iou),
            ("score_thresh", self.score_thresh),
            ("final_nms_iou", self.final_nms_iou),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("detector: {name} = {t} is outside (0, 1]")));
            }
        }
        if self.pre_nms_topk == 0 || self.post_nms_topk == 0 {
            return bad("top-k limits must be at least 1");
        }
        if self.roi_output == 0 || self.sampling_ratio == 0 {
            return bad("roi_output and sampling_ratio must be positive");
        }
        if self.fpn_channels == 0 || self.representation_size == 0 {
            return bad("fpn_channels and representation_size must be positive");
        }
        if !(self.canonical_size > 0.0) {
            return bad("canonical_size must be positive");
        }
        Ok(())
    }

    pub fn anchors_per_cell(&self) -> usize {
        self.aspect_ratios.len()
    }

    /// Flattened RoI feature length fed to the box head.
    pub fn roi_features(&self) -> usize {
        self.fpn_channels * self.roi_output * self.roi_output
    }
}

/// One detection in image pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDetection {
    pub bbox: Box2,
    pub score: f32,
    pub label: u64,
}

impl BoxDetection {
    /// COCO result entry, coordinates and score rounded to 6 decimals.
    pub fn to_coco(&self, image_id: u64) -> CocoDetection {
        CocoDetection {
            image_id,
            category_id: self.label,
            bbox: self.bbox.to_xywh().map(round6),
            score: round6(self.score as f64),
        }
    }
}

/// Every parameter of backbone, pyramid, RPN and box head.
pub fn model_param_specs(swin: &SwinConfig, det: &DetectorConfig) -> Vec<ParamSpec> {
    let stages = [0, 1, 2, 3].map(|i| swin.stage_channels(i));
    let mut v = crate::swin::param_specs(swin);
    v.extend(crate::fpn::param_specs(&stages, det.fpn_channels));
    v.extend(rpn::param_specs(det.fpn_channels, det.anchors_per_cell()));
    v.extend(head::param_specs(det.roi_features(), det.representation_size));
    v
}

/// Pool every proposal from its assigned level into `[N, C·out·out]`.
pub fn multiscale_roi_align(
    pyramid: &FeaturePyramid,
    proposals: &[Box2],
    image_side: usize,
    cfg: &DetectorConfig,
) -> Result<Tensor> {
    let c = pyramid.channels();
    let out = cfg.roi_output;
    let row = c * out * out;
    let mut data = vec![0.0; proposals.len() * row];
    for (roi, dst) in proposals.iter().zip(data.chunks_exact_mut(row.max(1))) {
        let k = assign_level(roi, cfg.level_k0, cfg.canonical_size, ROI_LEVELS.0, ROI_LEVELS.1);
        let f = pyramid.level(k);
        let [_, h, w] = dims3(f, "multiscale_roi_align")?;
        let scale = w as f32 / image_side as f32;
        roi::roi_align_into(f.data(), c, h, w, roi, scale, out, cfg.sampling_ratio, dst)?;
    }
    Tensor::new(vec![proposals.len(), row], data)
}

/// Full forward pass on a square `[in_channels, S, S]` image.
pub fn detect(image: &Tensor, weights: &Weights, swin: &SwinConfig, cfg: &DetectorConfig) -> Result<Vec<BoxDetection>> {
    let [_, h, w] = dims3(image, "detect")?;
    if h != w {
        return Err(Error::shape("detect", format!("image must be square, got {h}x{w}")));
    }
    weights.check(&model_param_specs(swin, cfg))?;
    let features = swin_forward(image, weights, swin)?;
    let pyramid = build_pyramid(&features, weights)?;
    let levels = rpn_forward(&pyramid, weights)?;
    let anchors = pyramid_anchors(cfg, &pyramid.sides(), w);
    let scored: Vec<ScoredLevel<'_>> = levels
        .iter()
        .zip(&anchors)
        .map(|(lv, a)| ScoredLevel { anchors: a, logits: lv.anchor_logits(), level: lv })
        .collect();
    let side = w as f32;
    let proposals: Vec<Box2> = select_proposals(&scored, cfg, side, side)
        .into_iter()
        .map(|p| p.bbox)
        .collect();
    log::debug!("{} proposals", proposals.len());
    let pooled = multiscale_roi_align(&pyramid, &proposals, w, cfg)?;
    let head = box_head_forward(&pooled, weights)?;
    Ok(postprocess(&proposals, &head, cfg, side, side))
}
