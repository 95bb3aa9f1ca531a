//! Multi-scale RoIAlign: choose a pyramid level per region, then pool a
//! fixed grid of bilinear samples without rounding coordinates.

use super::boxes::Box2;
use crate::error::{Error, Result};
use crate::tensor::{dims3, Tensor};

/// Pyramid level for a region: `⌊k0 + log2(√(w·h) / canonical)⌋` clamped
/// to `[min_level, max_level]`.
pub fn assign_level(roi: &Box2, k0: f64, canonical: f64, min_level: usize, max_level: usize) -> usize {
    let scale = (roi.area() as f64).sqrt();
    // The small offset keeps exact powers of two on the intended side of the floor.
    let k = (k0 + (scale / canonical + 1e-6).log2()).floor();
    (k.max(min_level as f64).min(max_level as f64)) as usize
}

/// Bilinear read of one plane at `(y, x)`. Points more than one cell
/// outside the map read 0; others are clamped to the border first.
pub fn bilinear(plane: &[f32], h: usize, w: usize, y: f32, x: f32) -> f32 {
    match bilinear_taps(h, w, y, x) {
        None => 0.0,
        Some(t) => t.iter().map(|&(i, wt)| wt * plane[i]).sum(),
    }
}

/// Four `(flat index, weight)` taps for a sample point, or `None` when it
/// reads 0.
fn bilinear_taps(h: usize, w: usize, y: f32, x: f32) -> Option<[(usize, f32); 4]> {
    if y < -1.0 || y > h as f32 || x < -1.0 || x > w as f32 {
        return None;
    }
    let (mut y, mut x) = (y.max(0.0), x.max(0.0));
    let mut y0 = y as usize;
    let mut x0 = x as usize;
    let y1;
    let x1;
    if y0 >= h - 1 {
        y0 = h - 1;
        y1 = h - 1;
        y = y0 as f32;
    } else {
        y1 = y0 + 1;
    }
    if x0 >= w - 1 {
        x0 = w - 1;
        x1 = w - 1;
        x = x0 as f32;
    } else {
        x1 = x0 + 1;
    }
    let (ly, lx) = (y - y0 as f32, x - x0 as f32);
    let (hy, hx) = (1.0 - ly, 1.0 - lx);
    Some([
        (y0 * w + x0, hy * hx),
        (y0 * w + x1, hy * lx),
        (y1 * w + x0, ly * hx),
        (y1 * w + x1, ly * lx),
    ])
}

/// Pool `feature [C, H, W]` over `roi` (image pixels) into `[C, out, out]`.
///
/// The roi is scaled by `spatial_scale` with no rounding; its size is at
/// least one cell. Each bin averages `samples × samples` points placed at
/// the centers of a regular sub-grid.
pub fn roi_align(feature: &Tensor, roi: &Box2, spatial_scale: f32, out: usize, samples: usize) -> Result<Tensor> {
    let [c, h, w] = dims3(feature, "roi_align")?;
    let mut dst = vec![0.0; c * out * out];
    roi_align_into(feature.data(), c, h, w, roi, spatial_scale, out, samples, &mut dst)?;
    Tensor::new(vec![c, out, out], dst)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn roi_align_into(
    data: &[f32],
    c: usize,
    h: usize,
    w: usize,
    roi: &Box2,
    spatial_scale: f32,
    out: usize,
    samples: usize,
    dst: &mut [f32],
) -> Result<()> {
    if out == 0 || samples == 0 || h == 0 || w == 0 {
        return Err(Error::shape("roi_align", "empty feature map, output or sampling grid"));
    }
    let x1 = roi.x1 * spatial_scale;
    let y1 = roi.y1 * spatial_scale;
    let rw = (roi.x2 * spatial_scale - x1).max(1.0);
    let rh = (roi.y2 * spatial_scale - y1).max(1.0);
    let bw = rw / out as f32;
    let bh = rh / out as f32;
    let inv = 1.0 / (samples * samples) as f32;

    // Taps for every bin, shared by all channels.
    let mut taps: Vec<Vec<(usize, f32)>> = Vec::with_capacity(out * out);
    for py in 0..out {
        for px in 0..out {
            let mut bin = Vec::with_capacity(4 * samples * samples);
            for iy in 0..samples {
                let y = y1 + py as f32 * bh + (iy as f32 + 0.5) * bh / samples as f32;
                for ix in 0..samples {
                    let x = x1 + px as f32 * bw + (ix as f32 + 0.5) * bw / samples as f32;
                    if let Some(t) = bilinear_taps(h, w, y, x) {
                        bin.extend(t.iter().map(|&(i, wt)| (i, wt * inv)));
                    }
                }
            }
            taps.push(bin);
        }
    }
    let plane = h * w;
    for ch in 0..c {
        let src = &data[ch * plane..(ch + 1) * plane];
        for (b, bin) in taps.iter().enumerate() {
            dst[ch * out * out + b] = bin.iter().map(|&(i, wt)| wt * src[i]).sum();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_assignment() {
        let lvl = |s: f32| assign_level(&Box2::new(0.0, 0.0, s, s), 4.0, 224.0, 2, 5);
        assert_eq!(lvl(224.0), 4);
        assert_eq!(lvl(56.0), 2);
        assert_eq!(lvl(112.0), 3);
        assert_eq!(lvl(448.0), 5);
        assert_eq!(lvl(5000.0), 5);
        assert_eq!(lvl(2.0), 2);
    }

    #[test]
    fn constant_map_gives_constant_output() {
        let f = Tensor::full(&[2, 8, 8], 3.5);
        let r = roi_align(&f, &Box2::new(4.0, 4.0, 20.0, 28.0), 0.25, 7, 2).unwrap();
        assert_eq!(r.shape(), &[2, 7, 7]);
        assert!(r.data().iter().all(|&v| (v - 3.5).abs() < 1e-6));
    }

    #[test]
    fn grid_node_is_exact() {
        let plane: Vec<f32> = (0..20).map(|i| i as f32 * 1.5).collect();
        assert_eq!(bilinear(&plane, 4, 5, 2.0, 3.0), plane[13]);
        assert_eq!(bilinear(&plane, 4, 5, -1.5, 0.0), 0.0);
        // one bin, one sample at the roi center
        let f = Tensor::new(vec![1, 4, 5], plane.clone()).unwrap();
        let r = roi_align(&f, &Box2::new(2.5, 1.5, 3.5, 2.5), 1.0, 1, 1).unwrap();
        assert_eq!(r.data()[0], plane[13]);
    }
}
