//! Pool a region of a small feature map with RoIAlign and compare one bin
//! with a hand-computed bilinear average.

use lungdet::detect::{bilinear, roi_align, Box2};
use lungdet::Tensor;

fn main() -> lungdet::Result<()> {
    let (h, w) = (8, 8);
    let feature = Tensor::from_fn(&[1, h, w], |i| (i / w) as f32 * 10.0 + (i % w) as f32);
    // region in image pixels on a stride-4 map
    let roi = Box2::new(6.0, 10.0, 20.0, 24.0);
    let pooled = roi_align(&feature, &roi, 0.25, 2, 2)?;
    println!("pooled 2x2: {:?}", pooled.data());

    let (x1, y1) = (roi.x1 * 0.25, roi.y1 * 0.25);
    let bin = (roi.x2 - roi.x1) * 0.25 / 2.0;
    let mut acc = 0.0;
    for iy in 0..2 {
        for ix in 0..2 {
            let y = y1 + (iy as f32 + 0.5) * bin / 2.0;
            let x = x1 + (ix as f32 + 0.5) * bin / 2.0;
            acc += bilinear(feature.data(), h, w, y, x);
        }
    }
    println!("bin (0,0) by hand: {}", acc / 4.0);
    Ok(())
}
