//! Second-stage box head and final detection filtering.

use super::boxes::{decode_deltas, nms, Box2};
use super::{BoxDetection, DetectorConfig};
use crate::error::{Error, Result};
use crate::preprocess::NODULE_CATEGORY_ID;
use crate::tensor::{linear, relu, softmax_rows_inplace, Tensor};
use crate::weights::{ParamSpec, Weights};

/// Number of classes including background.
pub const NUM_CLASSES: usize = 2;

/// Boxes narrower or shorter than this after clipping are discarded.
pub const MIN_BOX_SIDE: f32 = 1e-2;

pub fn param_specs(in_features: usize, hidden: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec::fan_in("box_head.fc6.weight", &[in_features, hidden], in_features),
        ParamSpec::fan_in("box_head.fc6.bias", &[hidden], in_features),
        ParamSpec::fan_in("box_head.fc7.weight", &[hidden, hidden], hidden),
        ParamSpec::fan_in("box_head.fc7.bias", &[hidden], hidden),
        ParamSpec::fan_in("box_head.cls_score.weight", &[hidden, NUM_CLASSES], hidden),
        ParamSpec::fan_in("box_head.cls_score.bias", &[NUM_CLASSES], hidden),
        ParamSpec::fan_in("box_head.bbox_pred.weight", &[hidden, 4], hidden),
        ParamSpec::fan_in("box_head.bbox_pred.bias", &[4], hidden),
    ]
}

/// Class probabilities `[N, 2]` (background, nodule) and class-agnostic
/// deltas `[N, 4]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutput {
    pub probs: Tensor,
    pub deltas: Tensor,
}

/// `roi_features: [N, C·7·7]` through two ReLU layers, then the class
/// softmax and the regression layer.
pub fn box_head_forward(roi_features: &Tensor, weights: &Weights) -> Result<HeadOutput> {
    if roi_features.rank() != 2 {
        return Err(Error::shape(
            "box_head_forward",
            format!("expected [N, features], got {:?}", roi_features.shape()),
        ));
    }
    let g = |n: &str| weights.get(n);
    let x = relu(&linear(roi_features, g("box_head.fc6.weight")?, Some(g("box_head.fc6.bias")?))?);
    let x = relu(&linear(&x, g("box_head.fc7.weight")?, Some(g("box_head.fc7.bias")?))?);
    let mut probs = linear(&x, g("box_head.cls_score.weight")?, Some(g("box_head.cls_score.bias")?))?;
    if probs.last_dim() != NUM_CLASSES {
        return Err(Error::Weights(format!(
            "box_head.cls_score has {} outputs, expected {NUM_CLASSES}",
            probs.last_dim()
        )));
    }
    softmax_rows_inplace(probs.data_mut(), NUM_CLASSES);
    let deltas = linear(&x, g("box_head.bbox_pred.weight")?, Some(g("box_head.bbox_pred.bias")?))?;
    Ok(HeadOutput { probs, deltas })
}

/// Turn head outputs into detections: keep rois whose nodule probability
/// reaches `score_thresh`, decode against the proposal, clip, drop
/// degenerate boxes, NMS at `final_nms_iou`, and order by descending score
/// (ties to the lower roi index).
pub fn postprocess(
    proposals: &[Box2],
    head: &HeadOutput,
    cfg: &DetectorConfig,
    width: f32,
    height: f32,
) -> Vec<BoxDetection> {
    let probs = head.probs.data();
    let deltas = head.deltas.data();
    let mut boxes = Vec::new();
    let mut scores = Vec::new();
    for (i, p) in proposals.iter().enumerate() {
        let score = probs[i * NUM_CLASSES + 1];
        if score < cfg.score_thresh {
            continue;
        }
        let d = [deltas[i * 4], deltas[i * 4 + 1], deltas[i * 4 + 2], deltas[i * 4 + 3]];
        let b = decode_deltas(p, d).clip(width, height);
        if b.width() < MIN_BOX_SIDE || b.height() < MIN_BOX_SIDE {
            continue;
        }
        boxes.push(b);
        scores.push(score);
    }
    let keep = nms(&boxes, &scores, cfg.final_nms_iou);
    // nms visits by (score desc, index asc), which is the output order.
    keep.into_iter()
        .map(|i| BoxDetection {
            bbox: boxes[i],
            score: scores[i].clamp(0.0, 1.0),
            label: NODULE_CATEGORY_ID,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{seeded_weights, zero_weights};

    #[test]
    fn shapes_and_softmax() {
        let w = seeded_weights(&param_specs(12, 8), 4);
        let x = Tensor::from_fn(&[5, 12], |i| (i % 5) as f32 - 2.0);
        let out = box_head_forward(&x, &w).unwrap();
        assert_eq!(out.probs.shape(), &[5, 2]);
        assert_eq!(out.deltas.shape(), &[5, 4]);
        for row in out.probs.data().chunks(2) {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_weights_are_uniform() {
        let w = zero_weights(&param_specs(12, 8));
        let out = box_head_forward(&Tensor::full(&[3, 12], 2.0), &w).unwrap();
        assert!(out.probs.data().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn empty_and_single_inputs() {
        let cfg = DetectorConfig::default();
        let empty = HeadOutput { probs: Tensor::zeros(&[0, 2]), deltas: Tensor::zeros(&[0, 4]) };
        assert!(postprocess(&[], &empty, &cfg, 64.0, 64.0).is_empty());
        let b = Box2::new(3.0, 4.0, 20.0, 30.0);
        let one = HeadOutput {
            probs: Tensor::new(vec![1, 2], vec![0.1, 0.9]).unwrap(),
            deltas: Tensor::zeros(&[1, 4]),
        };
        let dets = postprocess(&[b], &one, &cfg, 64.0, 64.0);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, b);
        assert_eq!(dets[0].score, 0.9);
    }

    #[test]
    fn low_scores_dropped_and_sorted() {
        let cfg = DetectorConfig::default();
        let props = [
            Box2::new(0.0, 0.0, 10.0, 10.0),
            Box2::new(20.0, 20.0, 30.0, 30.0),
            Box2::new(40.0, 40.0, 50.0, 50.0),
        ];
        let head = HeadOutput {
            probs: Tensor::new(vec![3, 2], vec![0.99, 0.01, 0.4, 0.6, 0.2, 0.8]).unwrap(),
            deltas: Tensor::zeros(&[3, 4]),
        };
        let dets = postprocess(&props, &head, &cfg, 64.0, 64.0);
        let got: Vec<Box2> = dets.iter().map(|d| d.bbox).collect();
        assert_eq!(got, vec![props[2], props[1]]);
    }
}
