//! COCO detection dataset / results layout and the slice manifest.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{round6, to_canonical_string};

use super::slices::BoxXywh;

pub const NODULE_CATEGORY_ID: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoxXywh,
    pub area: f64,
    pub iscrowd: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

/// Ground-truth dataset in COCO layout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// One entry of a COCO results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoDetection {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoxXywh,
    pub score: f64,
}

impl CocoDataset {
    pub fn nodule_categories() -> Vec<CocoCategory> {
        vec![CocoCategory {
            id: NODULE_CATEGORY_ID,
            name: "nodule".into(),
        }]
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: CocoDataset = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    /// Check id uniqueness, image references and `area = w·h`.
    pub fn validate(&self) -> Result<()> {
        let mut image_ids = HashSet::new();
        for im in &self.images {
            if !image_ids.insert(im.id) {
                return Err(Error::Consistency(format!("duplicate image id {}", im.id)));
            }
        }
        let mut ann_ids = HashSet::new();
        for a in &self.annotations {
            if !ann_ids.insert(a.id) {
                return Err(Error::Consistency(format!("duplicate annotation id {}", a.id)));
            }
            if !image_ids.contains(&a.image_id) {
                return Err(Error::Consistency(format!(
                    "annotation {} references missing image {}",
                    a.id, a.image_id
                )));
            }
            if !(a.bbox[2] > 0.0 && a.bbox[3] > 0.0) {
                return Err(Error::Consistency(format!(
                    "annotation {} has a degenerate box",
                    a.id
                )));
            }
            if (a.area - a.bbox[2] * a.bbox[3]).abs() > 1e-6 {
                return Err(Error::Consistency(format!(
                    "annotation {} area {} differs from w·h",
                    a.id, a.area
                )));
            }
        }
        Ok(())
    }

    pub fn image_by_file(&self) -> BTreeMap<&str, &CocoImage> {
        self.images.iter().map(|im| (im.file_name.as_str(), im)).collect()
    }
}

/// Identity and canvas of an exported slice.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SliceRecord {
    pub series_uid: String,
    pub z_index: usize,
    pub width: usize,
    pub height: usize,
}

/// A ground-truth box on a particular slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceLabel {
    pub series_uid: String,
    pub z_index: usize,
    pub bbox: BoxXywh,
}

/// Relative path under the output directory of a slice image.
pub fn slice_file_name(series_uid: &str, z_index: usize) -> String {
    format!("images/{series_uid}_{z_index:04}.pgm")
}

/// Assemble the dataset. Images get ids 1, 2, … in `(series_uid, z_index)`
/// order; annotations follow image order, keeping input order within an image.
pub fn export_coco(slices: &[SliceRecord], labels: &[SliceLabel]) -> Result<CocoDataset> {
    let mut sorted: Vec<&SliceRecord> = slices.iter().collect();
    sorted.sort();
    let mut images = Vec::with_capacity(sorted.len());
    let mut ids: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    for (i, s) in sorted.iter().enumerate() {
        let id = i as u64 + 1;
        if ids.insert((s.series_uid.as_str(), s.z_index), id).is_some() {
            return Err(Error::Consistency(format!(
                "slice {} z={} listed twice",
                s.series_uid, s.z_index
            )));
        }
        images.push(CocoImage {
            id,
            file_name: slice_file_name(&s.series_uid, s.z_index),
            width: s.width,
            height: s.height,
        });
    }
    let mut keyed = Vec::with_capacity(labels.len());
    for l in labels {
        let image_id = *ids
            .get(&(l.series_uid.as_str(), l.z_index))
            .ok_or_else(|| {
                Error::Consistency(format!(
                    "label references missing slice {} z={}",
                    l.series_uid, l.z_index
                ))
            })?;
        keyed.push((image_id, l));
    }
    keyed.sort_by_key(|(id, _)| *id);
    let annotations = keyed
        .into_iter()
        .enumerate()
        .map(|(i, (image_id, l))| {
            let bbox = l.bbox.map(round6);
            CocoAnnotation {
                id: i as u64 + 1,
                image_id,
                category_id: NODULE_CATEGORY_ID,
                bbox,
                area: round6(bbox[2] * bbox[3]),
                iscrowd: 0,
            }
        })
        .collect();
    let d = CocoDataset {
        images,
        annotations,
        categories: CocoDataset::nodule_categories(),
    };
    d.validate()?;
    Ok(d)
}

pub fn detections_to_json(dets: &[CocoDetection]) -> Result<String> {
    to_canonical_string(&dets)
}

pub fn detections_from_json(text: &str) -> Result<Vec<CocoDetection>> {
    Ok(serde_json::from_str(text)?)
}

/// Row of the slice manifest CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub series_uid: String,
    pub z_index: usize,
    pub file_name: String,
}

pub fn write_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(e)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("manifest is UTF-8"))
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::CsvRow {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })
        })
        .collect()
}
