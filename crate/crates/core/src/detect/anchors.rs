//! Anchor grids, one size per pyramid level with three aspect ratios.

use super::boxes::Box2;

/// Anchors on an `side × side` grid with cell `stride`. Anchor `(i, j, r)`
/// sits at index `(i·side + j)·R + r`, centered at
/// `((j + 0.5)·stride, (i + 0.5)·stride)`, with `w = size/√r`, `h = size·√r`
/// for ratio `r = h/w`.
pub fn generate_anchors(size: f32, ratios: &[f32], side: usize, stride: f32) -> Vec<Box2> {
    let shapes: Vec<(f32, f32)> = ratios
        .iter()
        .map(|&r| {
            let s = r.sqrt();
            (size / s, size * s)
        })
        .collect();
    let mut out = Vec::with_capacity(side * side * ratios.len());
    for i in 0..side {
        let cy = (i as f32 + 0.5) * stride;
        for j in 0..side {
            let cx = (j as f32 + 0.5) * stride;
            for &(w, h) in &shapes {
                out.push(Box2::from_center(cx, cy, w, h));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_shapes() {
        let a = generate_anchors(32.0, &[1.0], 1, 0.0);
        assert_eq!(a, vec![Box2::new(-16.0, -16.0, 16.0, 16.0)]);
        let a = generate_anchors(32.0, &[2.0], 1, 4.0);
        assert!((a[0].width() - 22.627417).abs() < 1e-4);
        assert!((a[0].height() - 45.254834).abs() < 1e-4);
        assert_eq!(a[0].center(), (2.0, 2.0));
    }

    #[test]
    fn ordering_is_row_cell_ratio() {
        let a = generate_anchors(16.0, &[0.5, 1.0, 2.0], 4, 8.0);
        assert_eq!(a.len(), 48);
        // (i=1, j=2, r=1)
        let b = a[(4 + 2) * 3 + 1];
        assert_eq!(b.center(), (20.0, 12.0));
        assert_eq!(b.width(), 16.0);
    }
}
