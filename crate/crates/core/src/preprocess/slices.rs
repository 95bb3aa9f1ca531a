//! Axial slice selection and nodule → pixel-box conversion.

use crate::ct_io::{voxel_to_world, world_to_voxel, CtVolume, NoduleAnnotation, VolumeMeta};
use crate::error::{Error, Result};

use super::window::{HuWindow, MAX_12BIT};

/// A windowed, 12-bit axial slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceImage {
    pub series_uid: String,
    pub z_index: usize,
    pub width: usize,
    pub height: usize,
    /// `height` rows of `width` samples, each ≤ 4095.
    pub pixels: Vec<u16>,
    /// In-plane `(sx, sy)` spacing in mm.
    pub px_spacing: [f64; 2],
}

impl SliceImage {
    pub fn from_volume(volume: &CtVolume, series_uid: &str, z: usize, window: &HuWindow) -> Self {
        let [nx, ny, _] = volume.meta.dims;
        let pixels = volume
            .slice(z)
            .iter()
            .map(|&hu| window.quantize(hu as i32))
            .collect();
        SliceImage {
            series_uid: series_uid.to_string(),
            z_index: z,
            width: nx,
            height: ny,
            pixels,
            px_spacing: [volume.meta.spacing[0], volume.meta.spacing[1]],
        }
    }

    pub fn is_12bit(&self) -> bool {
        self.pixels.iter().all(|&p| p <= MAX_12BIT)
    }
}

/// How far from a slice plane a nodule may be centered and still count as
/// contained: `|Δz| ≤ radius_factor · diameter`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SliceRule {
    pub radius_factor: f64,
}

impl Default for SliceRule {
    fn default() -> Self {
        SliceRule { radius_factor: 0.5 }
    }
}

// Absorbs rounding in origin + k·spacing so that exact-boundary cases count.
const Z_TOLERANCE_MM: f64 = 1e-6;

/// One selected slice and every nodule it contains.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedSlice {
    pub z_index: usize,
    pub annotations: Vec<NoduleAnnotation>,
}

/// Slices of `volume` containing at least one of `annotations`, ascending in
/// `z`. Annotations are expected to belong to this volume.
pub fn select_nodule_slices(
    volume: &CtVolume,
    annotations: &[NoduleAnnotation],
    rule: &SliceRule,
) -> Result<Vec<SelectedSlice>> {
    let meta = &volume.meta;
    let centers = annotations
        .iter()
        .map(|a| world_to_voxel(a.world, meta))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for z in 0..meta.dims[2] {
        let matched: Vec<NoduleAnnotation> = annotations
            .iter()
            .zip(&centers)
            .filter(|(a, v)| {
                let plane = voxel_to_world([v[0], v[1], z as f64], meta);
                (plane[2] - a.world[2]).abs() <= rule.radius_factor * a.diameter_mm + Z_TOLERANCE_MM
            })
            .map(|(a, _)| a.clone())
            .collect();
        if !matched.is_empty() {
            out.push(SelectedSlice {
                z_index: z,
                annotations: matched,
            });
        }
    }
    Ok(out)
}

/// Axis-aligned box in COCO `(x, y, w, h)` pixel convention.
pub type BoxXywh = [f64; 4];

/// The nodule's in-plane box before clipping: centered on the voxel-space
/// center with half-extents `d / (2·sx)` and `d / (2·sy)`.
pub fn annotation_box_unclipped(a: &NoduleAnnotation, meta: &VolumeMeta) -> Result<BoxXywh> {
    let [cx, cy, _] = world_to_voxel(a.world, meta)?;
    let rx = a.diameter_mm / (2.0 * meta.spacing[0]);
    let ry = a.diameter_mm / (2.0 * meta.spacing[1]);
    Ok([cx - rx, cy - ry, 2.0 * rx, 2.0 * ry])
}

/// Intersection of `bbox` with the `[0, width] × [0, height]` canvas, or
/// `None` if nothing of positive area is left.
pub fn clip_to_canvas(bbox: BoxXywh, width: usize, height: usize) -> Option<BoxXywh> {
    let x1 = bbox[0].max(0.0);
    let y1 = bbox[1].max(0.0);
    let x2 = (bbox[0] + bbox[2]).min(width as f64);
    let y2 = (bbox[1] + bbox[3]).min(height as f64);
    (x2 > x1 && y2 > y1).then_some([x1, y1, x2 - x1, y2 - y1])
}

/// Pixel box of a nodule on slice `z_index`, clipped to the slice canvas.
pub fn annotation_to_bbox(
    a: &NoduleAnnotation,
    meta: &VolumeMeta,
    z_index: usize,
) -> Result<BoxXywh> {
    let raw = annotation_box_unclipped(a, meta)?;
    let [nx, ny, _] = meta.dims;
    clip_to_canvas(raw, nx, ny).ok_or_else(|| Error::BoxOutsideCanvas {
        series_uid: a.series_uid.clone(),
        z_index,
        width: nx,
        height: ny,
    })
}
