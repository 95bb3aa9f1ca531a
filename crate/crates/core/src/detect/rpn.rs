//! Region proposal network: a shared 3×3 conv with objectness and delta
//! heads on every pyramid level, then top-k selection and NMS.

use super::anchors::generate_anchors;
use super::boxes::{argsort_desc, decode_deltas, nms, Box2};
use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::fpn::FeaturePyramid;
use crate::tensor::{conv2d, dims3, relu, Tensor};
use crate::weights::{ParamSpec, Weights};

/// Raw RPN outputs for one level: `objectness [A, S, S]`, `deltas [4A, S, S]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RpnLevel {
    pub objectness: Tensor,
    pub deltas: Tensor,
}

impl RpnLevel {
    pub fn side(&self) -> usize {
        self.objectness.shape()[1]
    }

    /// Per-anchor logits in anchor order `(i·S + j)·A + a`.
    pub fn anchor_logits(&self) -> Vec<f32> {
        let [a, s, _] = dims_of(&self.objectness);
        let o = self.objectness.data();
        let mut out = Vec::with_capacity(a * s * s);
        for cell in 0..s * s {
            for r in 0..a {
                out.push(o[r * s * s + cell]);
            }
        }
        out
    }

    /// Deltas of anchor `(cell, r)`.
    pub fn anchor_deltas(&self, index: usize) -> [f32; 4] {
        let [a, s, _] = dims_of(&self.objectness);
        let (cell, r) = (index / a, index % a);
        let d = self.deltas.data();
        let plane = s * s;
        std::array::from_fn(|k| d[(r * 4 + k) * plane + cell])
    }
}

fn dims_of(t: &Tensor) -> [usize; 3] {
    [t.shape()[0], t.shape()[1], t.shape()[2]]
}

pub fn param_specs(channels: usize, anchors_per_cell: usize) -> Vec<ParamSpec> {
    let fan = channels * 9;
    vec![
        ParamSpec::fan_in("rpn.conv.weight", &[channels, channels, 3, 3], fan),
        ParamSpec::fan_in("rpn.conv.bias", &[channels], fan),
        ParamSpec::fan_in("rpn.cls_logits.weight", &[anchors_per_cell, channels, 1, 1], channels),
        ParamSpec::fan_in("rpn.cls_logits.bias", &[anchors_per_cell], channels),
        ParamSpec::fan_in("rpn.bbox_pred.weight", &[4 * anchors_per_cell, channels, 1, 1], channels),
        ParamSpec::fan_in("rpn.bbox_pred.bias", &[4 * anchors_per_cell], channels),
    ]
}

/// Apply the shared head to every level.
pub fn rpn_forward(pyramid: &FeaturePyramid, weights: &Weights) -> Result<Vec<RpnLevel>> {
    let conv_w = weights.get("rpn.conv.weight")?;
    let conv_b = weights.get("rpn.conv.bias")?;
    let cls_w = weights.get("rpn.cls_logits.weight")?;
    let cls_b = weights.get("rpn.cls_logits.bias")?;
    let box_w = weights.get("rpn.bbox_pred.weight")?;
    let box_b = weights.get("rpn.bbox_pred.bias")?;
    if box_w.shape()[0] != 4 * cls_w.shape()[0] {
        return Err(Error::Weights(format!(
            "rpn.bbox_pred has {} outputs for {} anchors per cell",
            box_w.shape()[0],
            cls_w.shape()[0]
        )));
    }
    pyramid
        .levels
        .iter()
        .map(|p| {
            dims3(p, "rpn_forward")?;
            let t = relu(&conv2d(p, conv_w, conv_b, 1, 1)?);
            Ok(RpnLevel {
                objectness: conv2d(&t, cls_w, cls_b, 1, 0)?,
                deltas: conv2d(&t, box_w, box_b, 1, 0)?,
            })
        })
        .collect()
}

/// Anchors of every level for an `image_side` input, in level order.
pub fn pyramid_anchors(cfg: &DetectorConfig, sides: &[usize], image_side: usize) -> Vec<Vec<Box2>> {
    sides
        .iter()
        .zip(&cfg.anchor_sizes)
        .map(|(&s, &size)| generate_anchors(size, &cfg.aspect_ratios, s, image_side as f32 / s as f32))
        .collect()
}

/// A proposal with its objectness logit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub bbox: Box2,
    pub logit: f32,
}

/// Scored anchors of one level: logits and decoded (unclipped) boxes are
/// derived lazily from `level`.
pub struct ScoredLevel<'a> {
    pub anchors: &'a [Box2],
    pub logits: Vec<f32>,
    pub level: &'a RpnLevel,
}

/// Per level take the `pre_nms_topk` best anchors (ties to the lower
/// index), decode, clip to the image, drop boxes with a side under one
/// pixel, then run NMS over the union and keep `post_nms_topk`.
pub fn select_proposals(
    levels: &[ScoredLevel<'_>],
    cfg: &DetectorConfig,
    width: f32,
    height: f32,
) -> Vec<Proposal> {
    let mut pool = Vec::new();
    for lv in levels {
        let order = argsort_desc(&lv.logits);
        for &i in order.iter().take(cfg.pre_nms_topk) {
            let b = decode_deltas(&lv.anchors[i], lv.level.anchor_deltas(i)).clip(width, height);
            if b.width() >= 1.0 && b.height() >= 1.0 {
                pool.push(Proposal { bbox: b, logit: lv.logits[i] });
            }
        }
    }
    select_from_pool(&pool, cfg.rpn_nms_iou, cfg.post_nms_topk)
}

/// NMS over already-filtered candidates, keeping at most `topk`.
pub fn select_from_pool(pool: &[Proposal], iou: f32, topk: usize) -> Vec<Proposal> {
    let boxes: Vec<Box2> = pool.iter().map(|p| p.bbox).collect();
    let scores: Vec<f32> = pool.iter().map(|p| p.logit).collect();
    nms(&boxes, &scores, iou)
        .into_iter()
        .take(topk)
        .map(|i| pool[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::zero_weights;

    fn pyramid(c: usize, sides: &[usize]) -> FeaturePyramid {
        FeaturePyramid {
            levels: sides
                .iter()
                .map(|&s| Tensor::from_fn(&[c, s, s], |i| (i % 7) as f32 - 3.0))
                .collect(),
        }
    }

    #[test]
    fn shapes_follow_anchor_counts() {
        let w = crate::weights::seeded_weights(&param_specs(4, 3), 5);
        let out = rpn_forward(&pyramid(4, &[8, 4, 2]), &w).unwrap();
        for (lv, s) in out.iter().zip([8, 4, 2]) {
            assert_eq!(lv.objectness.shape(), &[3, s, s]);
            assert_eq!(lv.deltas.shape(), &[12, s, s]);
            assert_eq!(lv.anchor_logits().len(), s * s * 3);
        }
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let w = zero_weights(&param_specs(4, 3));
        let out = rpn_forward(&pyramid(4, &[4]), &w).unwrap();
        assert!(out[0].objectness.data().iter().all(|&v| v == 0.0));
        assert!(out[0].deltas.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anchor_layout_matches_channels() {
        let lv = RpnLevel {
            objectness: Tensor::from_fn(&[3, 2, 2], |i| i as f32),
            deltas: Tensor::from_fn(&[12, 2, 2], |i| i as f32),
        };
        // cell 1 (i=0, j=1), ratio 2 → objectness channel 2
        assert_eq!(lv.anchor_logits()[3 + 2], 9.0);
        assert_eq!(lv.anchor_deltas(3 + 2), [33.0, 37.0, 41.0, 45.0]);
    }

    #[test]
    fn proposals_drop_small_and_duplicates() {
        let cfg = DetectorConfig::default();
        let anchors = [
            Box2::new(0.0, 0.0, 10.0, 10.0),
            Box2::new(0.0, 0.0, 10.0, 10.0),
            Box2::new(20.0, 20.0, 20.5, 30.0),
        ];
        let lv = RpnLevel {
            objectness: Tensor::new(vec![3, 1, 1], vec![0.9, 0.8, 1.0]).unwrap(),
            deltas: Tensor::zeros(&[12, 1, 1]),
        };
        let scored = ScoredLevel { anchors: &anchors, logits: lv.anchor_logits(), level: &lv };
        let props = select_proposals(&[scored], &cfg, 64.0, 64.0);
        assert_eq!(props.len(), 1);
        assert_eq!(props[0].logit, 0.9);
    }
}
