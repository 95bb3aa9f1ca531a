//! Slice extraction: pick nodule-bearing axial slices, window them to 12 bits,
//! convert nodules to pixel boxes, and export images plus COCO annotations.

mod coco;
mod pgm;
mod slices;
mod window;

pub use coco::{
    detections_from_json, detections_to_json, export_coco, parse_manifest, slice_file_name,
    write_manifest, CocoAnnotation, CocoCategory, CocoDataset, CocoDetection, CocoImage,
    ManifestEntry, SliceLabel, SliceRecord, NODULE_CATEGORY_ID,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_slice_pgm, GrayImage};
pub use slices::{
    annotation_box_unclipped, annotation_to_bbox, clip_to_canvas, select_nodule_slices, BoxXywh,
    SelectedSlice, SliceImage, SliceRule,
};
pub use window::{window_and_quantize, HuWindow, MAX_12BIT};

use crate::ct_io::{CtVolume, NoduleAnnotation};
use crate::error::{Error, Result};

/// A windowed slice with the boxes of every nodule it contains.
#[derive(Clone, Debug)]
pub struct LabeledSlice {
    pub image: SliceImage,
    pub boxes: Vec<BoxXywh>,
}

/// Run slice selection, windowing and box conversion for one volume.
///
/// Boxes falling entirely outside the canvas are dropped with a warning; a
/// slice left without boxes is dropped too.
pub fn preprocess_volume(
    volume: &CtVolume,
    series_uid: &str,
    annotations: &[NoduleAnnotation],
    window: &HuWindow,
    rule: &SliceRule,
) -> Result<Vec<LabeledSlice>> {
    let own: Vec<NoduleAnnotation> = annotations
        .iter()
        .filter(|a| a.series_uid == series_uid)
        .cloned()
        .collect();
    let mut out = Vec::new();
    for sel in select_nodule_slices(volume, &own, rule)? {
        let mut boxes = Vec::with_capacity(sel.annotations.len());
        for a in &sel.annotations {
            match annotation_to_bbox(a, &volume.meta, sel.z_index) {
                Ok(b) => boxes.push(b),
                Err(e @ Error::BoxOutsideCanvas { .. }) => log::warn!("{e}"),
                Err(e) => return Err(e),
            }
        }
        if boxes.is_empty() {
            continue;
        }
        out.push(LabeledSlice {
            image: SliceImage::from_volume(volume, series_uid, sel.z_index, window),
            boxes,
        });
    }
    Ok(out)
}
