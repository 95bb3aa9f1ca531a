//! Anchor grids for a 512×512 input and greedy non-maximum suppression.

use lungdet::detect::{generate_anchors, nms, pyramid_anchors, Box2, DetectorConfig};

fn main() {
    let cfg = DetectorConfig::default();
    let sides = [128, 64, 32, 16, 8];
    let grids = pyramid_anchors(&cfg, &sides, 512);
    for ((s, size), g) in sides.iter().zip(&cfg.anchor_sizes).zip(&grids) {
        println!("side {s:>3}  size {size:>3}  anchors {:>6}", g.len());
    }
    println!("total {}", grids.iter().map(Vec::len).sum::<usize>());

    let a = generate_anchors(32.0, &[2.0], 1, 4.0)[0];
    println!("size 32, ratio 2: {:.3} x {:.3}", a.width(), a.height());

    let boxes = [
        Box2::new(10.0, 10.0, 50.0, 50.0),
        Box2::new(12.0, 12.0, 52.0, 52.0),
        Box2::new(100.0, 100.0, 130.0, 140.0),
        Box2::new(11.0, 9.0, 49.0, 51.0),
    ];
    let scores = [0.8, 0.9, 0.7, 0.9];
    println!("kept {:?}", nms(&boxes, &scores, 0.5));
}
