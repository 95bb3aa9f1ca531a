//! Built-in oracle suites: each compares a library kernel with an
//! independent scalar reference on random or hand-made cases.
//!
//! A [`Perturb`] hook corrupts one kernel's output before comparison, to
//! show that the matching suite notices.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::detect::{box_iou, nms, roi_align, Box2};
use crate::eval::{ap_at_threshold, evaluate_instances, iou, EvalConfig, ImageInstances};
use crate::fpn::{build_pyramid, param_specs as fpn_specs};
use crate::swin::{param_specs as swin_specs, swin_forward, SwinConfig};
use crate::tensor::{matmul, Tensor};
use crate::weights::seeded_weights;

/// Which kernel to corrupt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Perturb {
    Matmul,
    Iou,
    Nms,
    Ap,
    RoiAlign,
    Shapes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
    pub millis: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn unit(&mut self) -> f32 {
        (self.0.next_u32() >> 8) as f32 / (1u32 << 24) as f32
    }

    fn range(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.unit()
    }

    fn below(&mut self, n: usize) -> usize {
        (self.0.next_u32() as usize) % n.max(1)
    }

    fn boxed(&mut self, extent: f32) -> Box2 {
        let x = self.range(0.0, extent);
        let y = self.range(0.0, extent);
        Box2::new(x, y, x + self.range(1.0, extent / 3.0), y + self.range(1.0, extent / 3.0))
    }
}

fn suite(name: &'static str, body: impl FnOnce() -> (usize, Vec<String>)) -> SuiteResult {
    let t = Instant::now();
    let (cases, fails) = body();
    SuiteResult {
        name,
        cases,
        failures: fails.len(),
        detail: fails.into_iter().next().unwrap_or_default(),
        millis: t.elapsed().as_secs_f64() * 1e3,
    }
}

fn matmul_suite(p: Option<Perturb>) -> SuiteResult {
    suite("matmul", || {
        let mut rng = Rng::new(1);
        let mut fails = Vec::new();
        let n = 50;
        for case in 0..n {
            let (m, k, c) = (1 + rng.below(40), 1 + rng.below(300), 1 + rng.below(40));
            let a = Tensor::from_fn(&[m, k], |_| rng.range(-1.0, 1.0));
            let b = Tensor::from_fn(&[k, c], |_| rng.range(-1.0, 1.0));
            let mut got = matmul(&a, &b).expect("shapes agree");
            if p == Some(Perturb::Matmul) {
                got.data_mut()[0] += 1e-2;
            }
            for i in 0..m {
                for j in 0..c {
                    let want: f64 = (0..k).map(|t| a.data()[i * k + t] as f64 * b.data()[t * c + j] as f64).sum();
                    let d = (got.data()[i * c + j] as f64 - want).abs();
                    if d > 1e-4 {
                        fails.push(format!("case {case}: [{i},{j}] off by {d:e}"));
                    }
                }
            }
        }
        (n, fails)
    })
}

fn oracle_iou(a: &Box2, b: &Box2) -> f64 {
    let (a, b) = ([a.x1, a.y1, a.x2, a.y2].map(f64::from), [b.x1, b.y1, b.x2, b.y2].map(f64::from));
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn iou_suite(p: Option<Perturb>) -> SuiteResult {
    suite("iou", || {
        let mut fails = Vec::new();
        let mut rng = Rng::new(2);
        let hand = iou(&[0.0, 0.0, 2.0, 2.0], &[1.0, 1.0, 2.0, 2.0]);
        if (hand - 1.0 / 7.0).abs() > 1e-12 {
            fails.push(format!("hand case gave {hand}"));
        }
        let n = 1000;
        for case in 0..n {
            let (a, b) = (rng.boxed(50.0), rng.boxed(50.0));
            let mut got = box_iou(&a, &b) as f64;
            let xywh = iou(&a.to_xywh(), &b.to_xywh());
            if p == Some(Perturb::Iou) {
                got = got * 0.9 + 0.05;
            }
            let want = oracle_iou(&a, &b);
            if (got - want).abs() > 1e-5 || (xywh - want).abs() > 1e-5 {
                fails.push(format!("case {case}: {got} / {xywh} vs {want}"));
            }
        }
        (n + 1, fails)
    })
}

/// O(n²) greedy reference: repeatedly take the best remaining box.
fn oracle_nms(boxes: &[Box2], scores: &[f32], t: f32) -> Vec<usize> {
    let mut alive: Vec<bool> = vec![true; boxes.len()];
    let mut keep = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..boxes.len() {
            if alive[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        keep.push(b);
        alive[b] = false;
        for i in 0..boxes.len() {
            if alive[i] && oracle_iou(&boxes[b], &boxes[i]) > t as f64 {
                alive[i] = false;
            }
        }
    }
    keep
}

fn nms_suite(p: Option<Perturb>) -> SuiteResult {
    suite("nms", || {
        let mut rng = Rng::new(3);
        let mut fails = Vec::new();
        let n = 200;
        for case in 0..n {
            let count = rng.below(120);
            let boxes: Vec<Box2> = (0..count).map(|_| rng.boxed(100.0)).collect();
            // coarse scores so that ties occur
            let scores: Vec<f32> = (0..count).map(|_| (rng.below(20) as f32) / 20.0).collect();
            let t = rng.range(0.2, 0.8);
            let mut got = nms(&boxes, &scores, t);
            if p == Some(Perturb::Nms) && got.len() > 1 {
                got.pop();
            }
            let want = oracle_nms(&boxes, &scores, t);
            if got != want {
                fails.push(format!("case {case}: {} kept vs {} expected", got.len(), want.len()));
            }
        }
        (n, fails)
    })
}

fn ap_suite(p: Option<Perturb>) -> SuiteResult {
    suite("ap", || {
        let mut fails = Vec::new();
        let bump = if p == Some(Perturb::Ap) { 0.01 } else { 0.0 };
        let tp_first = ap_at_threshold(&[true, false], 1).map(|r| r.0 + bump);
        let fp_first = ap_at_threshold(&[false, true], 1).map(|r| r.0 + bump);
        if tp_first != Some(1.0) {
            fails.push(format!("TP-first AP {tp_first:?}, expected 1.0"));
        }
        if fp_first != Some(0.5) {
            fails.push(format!("FP-first AP {fp_first:?}, expected 0.5"));
        }
        let mut rng = Rng::new(4);
        let images: Vec<ImageInstances> = (0..6)
            .map(|id| {
                let gts: Vec<[f64; 4]> = (0..1 + rng.below(4)).map(|_| rng.boxed(200.0).to_xywh()).collect();
                ImageInstances {
                    image_id: id,
                    gt_areas: gts.iter().map(|g| g[2] * g[3]).collect(),
                    dets: gts.iter().map(|&g| (g, 1.0)).collect(),
                    gts,
                }
            })
            .collect();
        match evaluate_instances(&images, &EvalConfig::default()) {
            Ok(r) => {
                for (name, b) in &r.bins {
                    if b.gt_count > 0 && (b.map != Some(1.0) || b.mar != Some(1.0)) {
                        fails.push(format!("gt-as-detections bin {name}: mAP {:?} mAR {:?}", b.map, b.mar));
                    }
                }
            }
            Err(e) => fails.push(e.to_string()),
        }
        (3, fails)
    })
}

/// Scalar bilinear reference with the same boundary rule.
fn oracle_bilinear(f: &[f32], h: usize, w: usize, y: f64, x: f64) -> f64 {
    if y < -1.0 || y > h as f64 || x < -1.0 || x > w as f64 {
        return 0.0;
    }
    let y = y.max(0.0).min((h - 1) as f64);
    let x = x.max(0.0).min((w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (ly, lx) = (y - y0 as f64, x - x0 as f64);
    let at = |yy: usize, xx: usize| f[yy * w + xx] as f64;
    (1.0 - ly) * (1.0 - lx) * at(y0, x0) + (1.0 - ly) * lx * at(y0, x1) + ly * (1.0 - lx) * at(y1, x0) + ly * lx * at(y1, x1)
}

fn roi_suite(p: Option<Perturb>) -> SuiteResult {
    suite("roi_align", || {
        let mut rng = Rng::new(5);
        let mut fails = Vec::new();
        let n = 100;
        for case in 0..n {
            let (h, w) = (2 + rng.below(10), 2 + rng.below(10));
            let f = Tensor::from_fn(&[2, h, w], |_| rng.range(-1.0, 1.0));
            let scale = [1.0, 0.5, 0.25][rng.below(3)];
            let x1 = rng.range(-4.0, w as f32 / scale);
            let y1 = rng.range(-4.0, h as f32 / scale);
            let roi = Box2::new(x1, y1, x1 + rng.range(0.5, 12.0), y1 + rng.range(0.5, 12.0));
            let mut got = roi_align(&f, &roi, scale, 7, 2).expect("valid input");
            if p == Some(Perturb::RoiAlign) {
                got.data_mut()[3] += 1e-3;
            }
            let s = scale as f64;
            let (rx, ry) = (roi.x1 as f64 * s, roi.y1 as f64 * s);
            let rw = (roi.x2 as f64 * s - rx).max(1.0);
            let rh = (roi.y2 as f64 * s - ry).max(1.0);
            'outer: for c in 0..2 {
                let plane = &f.data()[c * h * w..(c + 1) * h * w];
                for py in 0..7 {
                    for px in 0..7 {
                        let mut acc = 0.0;
                        for iy in 0..2 {
                            for ix in 0..2 {
                                let y = ry + (py as f64 + (iy as f64 + 0.5) / 2.0) * rh / 7.0;
                                let x = rx + (px as f64 + (ix as f64 + 0.5) / 2.0) * rw / 7.0;
                                acc += oracle_bilinear(plane, h, w, y, x);
                            }
                        }
                        let d = (got.data()[(c * 7 + py) * 7 + px] as f64 - acc / 4.0).abs();
                        if d > 1e-5 {
                            fails.push(format!("case {case}: bin ({c},{py},{px}) off by {d:e}"));
                            break 'outer;
                        }
                    }
                }
            }
        }
        (n, fails)
    })
}

fn shapes_suite(p: Option<Perturb>) -> SuiteResult {
    suite("shapes", || {
        let mut fails = Vec::new();
        let cfg = SwinConfig { img_size: 64, ..SwinConfig::default() };
        let stages = [0, 1, 2, 3].map(|i| cfg.stage_channels(i));
        let mut specs = swin_specs(&cfg);
        specs.extend(fpn_specs(&stages, 256));
        let w = seeded_weights(&specs, 9);
        let img = Tensor::from_fn(&[3, 64, 64], |i| (i % 64) as f32 / 64.0);
        let run = || -> crate::Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
            let h = swin_forward(&img, &w, &cfg)?;
            let pyr = build_pyramid(&h, &w)?;
            Ok((
                h.levels.iter().map(|t| t.shape().to_vec()).collect(),
                pyr.levels.iter().map(|t| t.shape().to_vec()).collect(),
            ))
        };
        match run() {
            Ok((mut back, fpn)) => {
                if p == Some(Perturb::Shapes) {
                    back[3][0] += 1;
                }
                let want_back = [[96, 16, 16], [192, 8, 8], [384, 4, 4], [768, 2, 2]];
                if back != want_back.map(|s| s.to_vec()) {
                    fails.push(format!("backbone shapes {back:?}"));
                }
                let want_fpn: Vec<Vec<usize>> = [16, 8, 4, 2, 1].iter().map(|&s| vec![256, s, s]).collect();
                if fpn != want_fpn {
                    fails.push(format!("pyramid shapes {fpn:?}"));
                }
            }
            Err(e) => fails.push(e.to_string()),
        }
        (2, fails)
    })
}

/// Run every suite, corrupting `perturb` if given.
pub fn run_selftest(perturb: Option<Perturb>) -> Vec<SuiteResult> {
    vec![
        matmul_suite(perturb),
        iou_suite(perturb),
        nms_suite(perturb),
        ap_suite(perturb),
        roi_suite(perturb),
        shapes_suite(perturb),
    ]
}

/// Pass/fail table.
pub fn format_table(results: &[SuiteResult]) -> String {
    let mut s = format!("{:<12}{:>7}{:>10}{:>10}  {}\n", "suite", "cases", "failures", "ms", "status");
    for r in results {
        s.push_str(&format!(
            "{:<12}{:>7}{:>10}{:>10.1}  {}{}\n",
            r.name,
            r.cases,
            r.failures,
            r.millis,
            if r.passed() { "pass" } else { "FAIL" },
            if r.detail.is_empty() { String::new() } else { format!(" ({})", r.detail) }
        ));
    }
    s
}
