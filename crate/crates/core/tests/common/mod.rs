//! Reference implementations written for clarity, not speed, plus a small
//! deterministic RNG wrapper. Shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use lungdet::detect::Box2;
use lungdet::eval::{ImageInstances, Xywh};

pub struct Sampler(ChaCha8Rng);

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn f32_range(&mut self, lo: f32, hi: f32) -> f32 {
        self.range(lo as f64, hi as f64) as f32
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as i64
    }

    pub fn usize(&mut self, lo: usize, hi: usize) -> usize {
        self.int(lo as i64, hi as i64) as usize
    }

    pub fn bool(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn vec_f32(&mut self, n: usize, lo: f32, hi: f32) -> Vec<f32> {
        (0..n).map(|_| self.f32_range(lo, hi)).collect()
    }
}

// ---------------------------------------------------------------- tensors

/// `a [m, k] · b [k, n]` with f64 accumulation.
pub fn naive_matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|p| a[i * k + p] as f64 * b[p * n + j] as f64).sum();
        }
    }
    out
}

/// Direct zero-padded cross-correlation, `x [ci, h, w]`, `w [co, ci, k, k]`.
pub fn naive_conv2d(
    x: &[f32],
    (ci, h, w): (usize, usize, usize),
    wt: &[f32],
    bias: &[f32],
    (co, k): (usize, usize),
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; co * oh * ow];
    for o in 0..co {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = bias[o] as f64;
                for c in 0..ci {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * stride + ky) as isize - pad as isize;
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                continue;
                            }
                            let v = x[(c * h + y as usize) * w + xx as usize] as f64;
                            s += v * wt[((o * ci + c) * k + ky) * k + kx] as f64;
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = s;
            }
        }
    }
    (out, oh, ow)
}

// -------------------------------------------------------------- attention

/// Parameters for [`dense_window_attention`]; linear weights are `[in, out]`.
pub struct DenseAttention<'a> {
    pub heads: usize,
    pub qkv_w: &'a [f32],
    pub qkv_b: &'a [f32],
    pub proj_w: &'a [f32],
    pub proj_b: &'a [f32],
    /// `[(2·ws − 1)², heads]`.
    pub table: Option<&'a [f32]>,
}

/// Attention over the `ws × ws` tokens of one window, `x [N, C]`, computed
/// from the definition in f64. Returns `(output [N, C], probs [heads, N, N])`.
pub fn dense_window_attention(
    x: &[f32],
    n: usize,
    c: usize,
    ws: usize,
    p: &DenseAttention<'_>,
    mask: Option<&[f32]>,
) -> (Vec<f64>, Vec<f64>) {
    let d = c / p.heads;
    let qkv: Vec<f64> = {
        let mut v = naive_matmul(x, p.qkv_w, n, c, 3 * c);
        for t in 0..n {
            for j in 0..3 * c {
                v[t * 3 * c + j] += p.qkv_b[j] as f64;
            }
        }
        v
    };
    let side = 2 * ws - 1;
    let mut concat = vec![0.0; n * c];
    let mut probs = vec![0.0; p.heads * n * n];
    for h in 0..p.heads {
        for i in 0..n {
            let mut row = vec![0.0; n];
            for (j, r) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for e in 0..d {
                    s += qkv[i * 3 * c + h * d + e] * qkv[j * 3 * c + c + h * d + e];
                }
                s /= (d as f64).sqrt();
                if let Some(t) = p.table {
                    let dy = (i / ws) as isize - (j / ws) as isize + ws as isize - 1;
                    let dx = (i % ws) as isize - (j % ws) as isize + ws as isize - 1;
                    s += t[(dy as usize * side + dx as usize) * p.heads + h] as f64;
                }
                if let Some(m) = mask {
                    s += m[i * n + j] as f64;
                }
                *r = s;
            }
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|s| (s - mx).exp()).sum();
            for j in 0..n {
                let a = (row[j] - mx).exp() / z;
                probs[(h * n + i) * n + j] = a;
                for e in 0..d {
                    concat[i * c + h * d + e] += a * qkv[j * 3 * c + 2 * c + h * d + e];
                }
            }
        }
    }
    let mut out = vec![0.0; n * c];
    for i in 0..n {
        for j in 0..c {
            let mut s = p.proj_b[j] as f64;
            for e in 0..c {
                s += concat[i * c + e] * p.proj_w[e * c + j] as f64;
            }
            out[i * c + j] = s;
        }
    }
    (out, probs)
}

// ------------------------------------------------------------- detection

pub fn oracle_iou(a: &Box2, b: &Box2) -> f32 {
    let area = |r: &Box2| (r.x2 - r.x1).max(0.0) * (r.y2 - r.y1).max(0.0);
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    let union = area(a) + area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Repeatedly take the best remaining box (ties to the lower index) and
/// discard every remaining box overlapping it by more than `t`.
pub fn oracle_nms(boxes: &[Box2], scores: &[f32], t: f32) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..boxes.len()).collect();
    let mut keep = Vec::new();
    while !alive.is_empty() {
        let mut best = 0;
        for k in 1..alive.len() {
            if scores[alive[k]] > scores[alive[best]] {
                best = k;
            }
        }
        let b = alive.remove(best);
        keep.push(b);
        alive.retain(|&j| oracle_iou(&boxes[b], &boxes[j]) <= t);
    }
    keep
}

/// Bilinear sample in f64 following the usual RoIAlign border rules.
pub fn oracle_bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f64 {
    if y < -1.0 || y > h as f64 || x < -1.0 || x > w as f64 {
        return 0.0;
    }
    let y = y.max(0.0);
    let x = x.max(0.0);
    let (y0, y1, y) = if y.floor() as usize >= h - 1 {
        (h - 1, h - 1, (h - 1) as f64)
    } else {
        (y.floor() as usize, y.floor() as usize + 1, y)
    };
    let (x0, x1, x) = if x.floor() as usize >= w - 1 {
        (w - 1, w - 1, (w - 1) as f64)
    } else {
        (x.floor() as usize, x.floor() as usize + 1, x)
    };
    let ly = y - y0 as f64;
    let lx = x - x0 as f64;
    let at = |yy: usize, xx: usize| plane[yy * w + xx] as f64;
    (1.0 - ly) * (1.0 - lx) * at(y0, x0)
        + (1.0 - ly) * lx * at(y0, x1)
        + ly * (1.0 - lx) * at(y1, x0)
        + ly * lx * at(y1, x1)
}

/// RoIAlign one channel at a time, one sample at a time.
pub fn oracle_roi_align(
    feature: &[f32],
    (c, h, w): (usize, usize, usize),
    roi: &Box2,
    scale: f32,
    out: usize,
    samples: usize,
) -> Vec<f64> {
    let x1 = (roi.x1 * scale) as f64;
    let y1 = (roi.y1 * scale) as f64;
    let rw = ((roi.x2 * scale) as f64 - x1).max(1.0);
    let rh = ((roi.y2 * scale) as f64 - y1).max(1.0);
    let (bw, bh) = (rw / out as f64, rh / out as f64);
    let mut res = vec![0.0; c * out * out];
    for ch in 0..c {
        let plane = &feature[ch * h * w..(ch + 1) * h * w];
        for py in 0..out {
            for px in 0..out {
                let mut acc = 0.0;
                for iy in 0..samples {
                    for ix in 0..samples {
                        let y = y1 + py as f64 * bh + (iy as f64 + 0.5) * bh / samples as f64;
                        let x = x1 + px as f64 * bw + (ix as f64 + 0.5) * bw / samples as f64;
                        acc += oracle_bilinear(plane, h, w, y, x);
                    }
                }
                res[(ch * out + py) * out + px] = acc / (samples * samples) as f64;
            }
        }
    }
    res
}

pub fn random_box(rng: &mut Sampler, extent: f32, min_side: f32, max_side: f32) -> Box2 {
    let w = rng.f32_range(min_side, max_side);
    let h = rng.f32_range(min_side, max_side);
    let x = rng.f32_range(0.0, extent);
    let y = rng.f32_range(0.0, extent);
    Box2::new(x, y, x + w, y + h)
}

// ------------------------------------------------------------- evaluator

/// Per-bin result of [`oracle_evaluate`]: `(ap, recall)` per threshold, or
/// `None` for a bin without ground truth.
pub type OracleBin = Vec<Option<(f64, f64)>>;

fn oracle_box_iou(a: &Xywh, b: &Xywh) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let u = a[2] * a[3] + b[2] * b[3] - ix * iy;
    if u <= 0.0 {
        0.0
    } else {
        ix * iy / u
    }
}

/// Nearest-rank tertile cuts.
pub fn oracle_tertiles(areas: &[f64]) -> Option<[f64; 2]> {
    if areas.is_empty() {
        return None;
    }
    let mut s = areas.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let pick = |q: f64| s[((q * n / 3.0).ceil() as usize).max(1) - 1];
    Some([pick(1.0), pick(2.0)])
}

/// COCO-style evaluation with every matching decision made by scanning
/// all candidates explicitly. Bins are (small, medium, large, all), with a
/// value on a cut belonging to the lower bin.
pub fn oracle_evaluate(
    images: &[ImageInstances],
    cuts: [f64; 2],
    thresholds: &[f64],
    max_det: usize,
) -> [OracleBin; 4] {
    let in_bin = |bin: usize, a: f64| match bin {
        0 => a <= cuts[0],
        1 => a > cuts[0] && a <= cuts[1],
        2 => a > cuts[1],
        _ => true,
    };
    let mut out: [OracleBin; 4] = Default::default();
    for (bin, slot) in out.iter_mut().enumerate() {
        let n_gt: usize = images
            .iter()
            .map(|im| im.gt_areas.iter().filter(|&&a| in_bin(bin, a)).count())
            .sum();
        for &t in thresholds {
            if n_gt == 0 {
                slot.push(None);
                continue;
            }
            // (score, image position, det index, tp)
            let mut pool: Vec<(f64, usize, usize, bool)> = Vec::new();
            for (pos, im) in images.iter().enumerate() {
                let mut order: Vec<usize> = (0..im.dets.len()).collect();
                // stable sort keeps the original order among equal scores
                order.sort_by(|&a, &b| im.dets[b].1.partial_cmp(&im.dets[a].1).unwrap());
                order.truncate(max_det);
                let mut taken = vec![false; im.gts.len()];
                for &di in &order {
                    let (dbox, score) = im.dets[di];
                    // candidates ranked by (not ignored, iou, lower index)
                    let mut pick: Option<usize> = None;
                    for g in 0..im.gts.len() {
                        let v = oracle_box_iou(&dbox, &im.gts[g]);
                        if taken[g] || v < t {
                            continue;
                        }
                        pick = match pick {
                            None => Some(g),
                            Some(p) => {
                                let key = |k: usize| {
                                    (in_bin(bin, im.gt_areas[k]), oracle_box_iou(&dbox, &im.gts[k]))
                                };
                                let (kp, kg) = (key(p), key(g));
                                if (kg.0 && !kp.0) || (kg.0 == kp.0 && kg.1 > kp.1) {
                                    Some(g)
                                } else {
                                    Some(p)
                                }
                            }
                        };
                    }
                    match pick {
                        Some(g) => {
                            taken[g] = true;
                            if in_bin(bin, im.gt_areas[g]) {
                                pool.push((score, pos, di, true));
                            }
                        }
                        None => {
                            if in_bin(bin, dbox[2] * dbox[3]) {
                                pool.push((score, pos, di, false));
                            }
                        }
                    }
                }
            }
            pool.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap()
                    .then(images[a.1].image_id.cmp(&images[b.1].image_id))
                    .then(a.2.cmp(&b.2))
            });
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut rc = Vec::new();
            let mut pr = Vec::new();
            for p in &pool {
                if p.3 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
                rc.push(tp / n_gt as f64);
                pr.push(tp / (tp + fp));
            }
            // precision made non-increasing by a right-to-left running max
            let mut run = 0.0f64;
            for v in pr.iter_mut().rev() {
                run = run.max(*v);
                *v = run;
            }
            let mut sum = 0.0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                if let Some(k) = rc.iter().position(|&x| x >= r) {
                    sum += pr[k];
                }
            }
            slot.push(Some((sum / 101.0, rc.last().copied().unwrap_or(0.0))));
        }
    }
    out
}

/// A few images with ground truth and detections on a coarse grid, so
/// that overlaps, exact ties and duplicated boxes all occur.
pub fn random_instances(rng: &mut Sampler) -> Vec<ImageInstances> {
    let n_img = rng.usize(1, 4);
    let mut ids: Vec<u64> = (0..n_img as u64).map(|i| i * 3 + rng.int(0, 2) as u64).collect();
    ids.sort();
    ids.dedup();
    let grid_box = |rng: &mut Sampler| -> Xywh {
        let x = rng.int(0, 12) as f64 * 2.0;
        let y = rng.int(0, 12) as f64 * 2.0;
        let w = rng.int(1, 8) as f64 * 2.0;
        let h = rng.int(1, 8) as f64 * 2.0;
        [x, y, w, h]
    };
    ids.into_iter()
        .map(|image_id| {
            let gts: Vec<Xywh> = (0..rng.usize(0, 5)).map(|_| grid_box(rng)).collect();
            let gt_areas = gts.iter().map(|g| g[2] * g[3]).collect();
            let mut dets = Vec::new();
            for _ in 0..rng.usize(0, 8) {
                let b = if !gts.is_empty() && rng.bool(0.5) {
                    let g = gts[rng.usize(0, gts.len() - 1)];
                    let j = |rng: &mut Sampler| rng.int(-1, 1) as f64;
                    [g[0] + j(rng), g[1] + j(rng), (g[2] + j(rng)).max(1.0), (g[3] + j(rng)).max(1.0)]
                } else {
                    grid_box(rng)
                };
                dets.push((b, rng.int(1, 10) as f64 / 10.0));
            }
            ImageInstances { image_id, gts, gt_areas, dets }
        })
        .collect()
}
