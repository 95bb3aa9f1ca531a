//! CT volume ingestion: MetaImage volumes, annotation CSVs and the
//! world/voxel coordinate transform.

mod annotations;
mod coords;
mod mhd;

pub use annotations::{parse_annotations_csv, write_annotations_csv, NoduleAnnotation};
pub use coords::{det3, invert3, voxel_to_world, world_to_voxel, Mat3};
pub use mhd::{
    load_volume, parse_mhd, read_volume, serialize_mhd, write_volume, CtVolume, VolumeMeta,
    IDENTITY, PLAUSIBLE_HU,
};
