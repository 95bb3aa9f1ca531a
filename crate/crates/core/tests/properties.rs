//! Property-based invariants.

mod common;

use common::*;
use lungdet::ct_io::{voxel_to_world, world_to_voxel, VolumeMeta, IDENTITY};
use lungdet::detect::{decode_deltas, encode_deltas, nms, Box2};
use lungdet::eval::{area_histogram, area_ranges, bin_of, evaluate_instances, EvalConfig, BIN_NAMES};
use lungdet::fpn::{build_pyramid, param_specs};
use lungdet::preprocess::HuWindow;
use lungdet::swin::FeatureHierarchy;
use lungdet::tensor::{conv2d, matmul};
use lungdet::weights::{seeded_weights, Init};
use lungdet::Tensor;
use proptest::prelude::*;

fn boxes_strategy(max: usize) -> impl Strategy<Value = Vec<(Box2, f32)>> {
    prop::collection::vec(
        (0f32..80.0, 0f32..80.0, 1f32..30.0, 1f32..30.0, 0u8..20),
        0..max,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(x, y, w, h, s)| (Box2::new(x, y, x + w, y + h), s as f32 / 20.0))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nms_matches_reference(items in boxes_strategy(60), t in 0.1f32..0.9) {
        let (boxes, scores): (Vec<Box2>, Vec<f32>) = items.into_iter().unzip();
        let keep = nms(&boxes, &scores, t);
        prop_assert_eq!(&keep, &oracle_nms(&boxes, &scores, t));
        // survivors pairwise overlap by at most t
        for (a, &i) in keep.iter().enumerate() {
            for &j in &keep[a + 1..] {
                prop_assert!(oracle_iou(&boxes[i], &boxes[j]) <= t);
            }
        }
    }

    #[test]
    fn delta_round_trip(
        (ax, ay, aw, ah) in (0f32..512.0, 0f32..512.0, 16f32..512.0, 16f32..512.0),
        (tx, ty, tw, th) in (0f32..512.0, 0f32..512.0, 1f32..512.0, 1f32..512.0),
    ) {
        let anchor = Box2::new(ax, ay, ax + aw, ay + ah);
        let target = Box2::new(tx, ty, tx + tw, ty + th);
        let back = decode_deltas(&anchor, encode_deltas(&anchor, &target));
        for (a, b) in [(back.x1, target.x1), (back.y1, target.y1), (back.x2, target.x2), (back.y2, target.y2)] {
            prop_assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn ap_invariant_under_monotone_rescaling(seed in any::<u64>()) {
        let mut images = random_instances(&mut Sampler::new(seed));
        let cfg = EvalConfig::default();
        let before = evaluate_instances(&images, &cfg).unwrap();
        for im in &mut images {
            for d in &mut im.dets {
                d.1 = 0.05 + 0.9 * d.1 * d.1;
            }
        }
        let after = evaluate_instances(&images, &cfg).unwrap();
        for name in BIN_NAMES {
            prop_assert_eq!(&before.bin(name).ap, &after.bin(name).ap);
            prop_assert_eq!(&before.bin(name).recall, &after.bin(name).recall);
        }
    }

    #[test]
    fn low_scoring_false_positive_never_raises_ap(seed in any::<u64>(), side in 1.0f64..30.0) {
        let mut images = random_instances(&mut Sampler::new(seed));
        // fixed cuts so the extra detection cannot move the bins
        let cfg = EvalConfig { area_cuts: vec![20.0, 80.0], ..EvalConfig::default() };
        let before = evaluate_instances(&images, &cfg).unwrap();
        // far from every box on the grid, below every score
        images[0].dets.push(([1000.0, 1000.0, side, side], 0.01));
        let after = evaluate_instances(&images, &cfg).unwrap();
        for name in BIN_NAMES {
            let (b, a) = (before.bin(name), after.bin(name));
            for (x, y) in b.ap.iter().zip(&a.ap) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!(y <= x),
                    _ => prop_assert_eq!(x, y),
                }
            }
            prop_assert_eq!(&b.recall, &a.recall);
        }
    }

    #[test]
    fn interpolated_precision_is_non_increasing(seed in any::<u64>()) {
        let images = random_instances(&mut Sampler::new(seed));
        let r = evaluate_instances(&images, &EvalConfig::default()).unwrap();
        for name in BIN_NAMES {
            for c in r.bin(name).curves.iter().flatten() {
                prop_assert!(c.precision.windows(2).all(|w| w[1] <= w[0]));
                prop_assert!(c.precision.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn coordinates_round_trip(
        v in prop::array::uniform3(-50.0f64..600.0),
        spacing in prop::array::uniform3(0.2f64..5.0),
        origin in prop::array::uniform3(-500.0f64..500.0),
        flip in prop::array::uniform3(any::<bool>()),
    ) {
        let mut direction = IDENTITY;
        for k in 0..3 {
            if flip[k] {
                direction[k][k] = -1.0;
            }
        }
        let meta = VolumeMeta { dims: [1, 1, 1], spacing, origin, direction, data_file: String::new() };
        let back = world_to_voxel(voxel_to_world(v, &meta), &meta).unwrap();
        for k in 0..3 {
            prop_assert!((back[k] - v[k]).abs() * spacing[k] <= 1e-9);
        }
    }

    #[test]
    fn window_is_monotone_and_saturating(lo in -2000i32..0, span in 1i32..3000, a in -4000i32..4000, b in -4000i32..4000) {
        let w = HuWindow { lo, hi: lo + span };
        let (a, b) = (a.min(b), a.max(b));
        prop_assert!(w.quantize(a) <= w.quantize(b));
        prop_assert_eq!(w.quantize(lo.min(a)), 0);
        prop_assert_eq!(w.quantize(w.hi.max(b)), 4095);
    }

    #[test]
    fn histogram_counts_every_area(areas in prop::collection::vec(0.0f64..5000.0, 0..200), width in 1.0f64..200.0) {
        let h = area_histogram(&areas, width).unwrap();
        prop_assert_eq!(h.iter().map(|b| b.1).sum::<usize>(), areas.len());
        for w in h.windows(2) {
            prop_assert!((w[1].0 - w[0].0 - width).abs() < 1e-9 * width.max(w[1].0));
        }
    }

    #[test]
    fn area_bins_partition(a in 1.0f64..1000.0, gap in 0.0f64..1000.0, area in 0.0f64..3000.0) {
        let cuts = [a, a + gap + f64::EPSILON * a];
        let ranges = area_ranges(cuts);
        let hits: Vec<usize> = (0..3).filter(|&i| ranges[i].contains(area)).collect();
        prop_assert_eq!(hits.len(), 1);
        prop_assert_eq!(hits[0], bin_of(area, cuts));
        prop_assert!(ranges[3].contains(area));
        // a value on a cut belongs to the lower bin
        prop_assert_eq!(bin_of(cuts[0], cuts), 0);
        prop_assert_eq!(bin_of(cuts[1], cuts), 1);
    }

    #[test]
    fn matmul_matches_naive(m in 1usize..12, k in 1usize..40, n in 1usize..20, seed in any::<u64>()) {
        let mut rng = Sampler::new(seed);
        let a = rng.vec_f32(m * k, -1.0, 1.0);
        let b = rng.vec_f32(k * n, -1.0, 1.0);
        let got = matmul(&Tensor::new(vec![m, k], a.clone()).unwrap(), &Tensor::new(vec![k, n], b.clone()).unwrap()).unwrap();
        for (g, w) in got.data().iter().zip(naive_matmul(&a, &b, m, k, n)) {
            prop_assert!((*g as f64 - w).abs() <= 1e-5 * (k as f64).sqrt());
        }
    }

    #[test]
    fn conv2d_matches_naive(
        ci in 1usize..4, co in 1usize..5, h in 1usize..10, w in 1usize..10,
        k in prop::sample::select(vec![1usize, 3]), stride in 1usize..3, seed in any::<u64>(),
    ) {
        let pad = k / 2;
        let mut rng = Sampler::new(seed);
        let x = rng.vec_f32(ci * h * w, -1.0, 1.0);
        let wt = rng.vec_f32(co * ci * k * k, -1.0, 1.0);
        let bias = rng.vec_f32(co, -1.0, 1.0);
        let got = conv2d(
            &Tensor::new(vec![ci, h, w], x.clone()).unwrap(),
            &Tensor::new(vec![co, ci, k, k], wt.clone()).unwrap(),
            &Tensor::new(vec![co], bias.clone()).unwrap(),
            stride,
            pad,
        );
        // strides that do not tile the padded input exactly are rejected
        let tiles = (h + 2 * pad - k) % stride == 0 && (w + 2 * pad - k) % stride == 0;
        prop_assert_eq!(got.is_ok(), tiles);
        let Ok(got) = got else { return Ok(()) };
        let (want, oh, ow) = naive_conv2d(&x, (ci, h, w), &wt, &bias, (co, k), stride, pad);
        prop_assert_eq!(got.shape(), &[co, oh, ow]);
        for (g, e) in got.data().iter().zip(want) {
            prop_assert!((*g as f64 - e).abs() <= 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pyramid_is_positively_homogeneous(alpha in 0.1f32..10.0, seed in any::<u64>()) {
        let chans = [4, 8, 16, 32];
        let specs: Vec<_> = param_specs(&chans, 6)
            .into_iter()
            .map(|mut s| {
                if s.name.ends_with("bias") {
                    s.init = Init::Zeros;
                }
                s
            })
            .collect();
        let weights = seeded_weights(&specs, seed);
        let mut rng = Sampler::new(seed);
        let levels = [0, 1, 2, 3].map(|i| {
            let s = 16 >> i;
            Tensor::new(vec![chans[i], s, s], rng.vec_f32(chans[i] * s * s, -1.0, 1.0)).unwrap()
        });
        let scaled = FeatureHierarchy { levels: levels.clone().map(|t| t.scale(alpha)) };
        let p = build_pyramid(&FeatureHierarchy { levels }, &weights).unwrap();
        let q = build_pyramid(&scaled, &weights).unwrap();
        for (a, b) in p.levels.iter().zip(&q.levels) {
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x * alpha - y).abs() <= 1e-4 * alpha.max(1.0));
            }
        }
    }
}
