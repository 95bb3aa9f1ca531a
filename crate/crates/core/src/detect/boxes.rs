//! Corner-format boxes, the center/size delta parameterization, and greedy NMS.

use serde::{Deserialize, Serialize};

/// Axis-aligned box `(x1, y1, x2, y2)` in image pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

/// Largest width/height log-ratio applied when decoding.
pub const DELTA_CLAMP: f32 = 6.907_755_4; // ln(1000)

impl Box2 {
    pub const fn new(x1: f32, y1: f32, x2: f32, y2: f32) -> Self {
        Box2 { x1, y1, x2, y2 }
    }

    pub fn from_center(cx: f32, cy: f32, w: f32, h: f32) -> Self {
        Box2::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn width(&self) -> f32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f32 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f32, f32) {
        (self.x1 + 0.5 * self.width(), self.y1 + 0.5 * self.height())
    }

    pub fn area(&self) -> f32 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Clamp both corners into `[0, width] × [0, height]`.
    pub fn clip(&self, width: f32, height: f32) -> Box2 {
        Box2::new(
            self.x1.clamp(0.0, width),
            self.y1.clamp(0.0, height),
            self.x2.clamp(0.0, width),
            self.y2.clamp(0.0, height),
        )
    }

    /// `[x, y, w, h]` in `f64`.
    pub fn to_xywh(&self) -> [f64; 4] {
        let (x1, y1) = (self.x1 as f64, self.y1 as f64);
        [x1, y1, self.x2 as f64 - x1, self.y2 as f64 - y1]
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn box_iou(a: &Box2, b: &Box2) -> f32 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Regression targets `(tx, ty, tw, th)` taking `anchor` to `target`,
/// computed in `f64`.
pub fn encode_deltas(anchor: &Box2, target: &Box2) -> [f32; 4] {
    let (ax, ay, aw, ah) = center_size(anchor);
    let (tx, ty, tw, th) = center_size(target);
    [
        ((tx - ax) / aw) as f32,
        ((ty - ay) / ah) as f32,
        (tw / aw).ln() as f32,
        (th / ah).ln() as f32,
    ]
}

/// Apply deltas to `anchor`. `tw` and `th` are clamped to `ln(1000)` before
/// exponentiation; the result is not clipped. Intermediates are `f64`.
pub fn decode_deltas(anchor: &Box2, d: [f32; 4]) -> Box2 {
    let (ax, ay, aw, ah) = center_size(anchor);
    let cx = ax + d[0] as f64 * aw;
    let cy = ay + d[1] as f64 * ah;
    let w = aw * (d[2].min(DELTA_CLAMP) as f64).exp();
    let h = ah * (d[3].min(DELTA_CLAMP) as f64).exp();
    Box2::new(
        (cx - 0.5 * w) as f32,
        (cy - 0.5 * h) as f32,
        (cx + 0.5 * w) as f32,
        (cy + 0.5 * h) as f32,
    )
}

fn center_size(b: &Box2) -> (f64, f64, f64, f64) {
    let (x1, y1, x2, y2) = (b.x1 as f64, b.y1 as f64, b.x2 as f64, b.y2 as f64);
    ((x1 + x2) * 0.5, (y1 + y2) * 0.5, x2 - x1, y2 - y1)
}

/// Order of `scores` by descending value, ties to the lower index.
pub fn argsort_desc(scores: &[f32]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Greedy non-maximum suppression. Visits boxes by descending score (ties
/// to the lower index) and drops any box whose IoU with an already kept box
/// exceeds `iou_threshold`. Returns kept indices in visiting order.
pub fn nms(boxes: &[Box2], scores: &[f32], iou_threshold: f32) -> Vec<usize> {
    assert_eq!(boxes.len(), scores.len(), "nms: one score per box");
    let order = argsort_desc(scores);
    let mut suppressed = vec![false; boxes.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        let bi = boxes[i];
        for &j in &order[pos + 1..] {
            if !suppressed[j] && box_iou(&bi, &boxes[j]) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}
