//! MetaImage (`.mhd` + `.raw`) header parsing and volume loading.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Geometry and storage metadata of a CT volume.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeMeta {
    /// `(nx, ny, nz)` in voxels.
    pub dims: [usize; 3],
    /// mm per voxel along x, y, z; all strictly positive.
    pub spacing: [f64; 3],
    /// World position of voxel (0, 0, 0) in mm.
    pub origin: [f64; 3],
    /// Row-major direction cosines.
    pub direction: [[f64; 3]; 3],
    /// Payload file, relative to the header.
    pub data_file: String,
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl VolumeMeta {
    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, n: usize) -> Result<Vec<T>> {
    let bad = || Error::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    };
    let items = value
        .split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| bad()))
        .collect::<Result<Vec<T>>>()?;
    if items.len() != n {
        return Err(bad());
    }
    Ok(items)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

/// Parse a MetaImage header.
///
/// Only 3-D, uncompressed, little-endian `MET_SHORT` volumes are accepted.
/// `Origin` and `Position` are read as aliases of `Offset`; a missing
/// `TransformMatrix` means identity. Unknown keys are ignored.
pub fn parse_mhd(text: &str) -> Result<VolumeMeta> {
    let mut dims = None;
    let mut spacing = None;
    let mut origin = [0.0; 3];
    let mut direction = IDENTITY;
    let mut data_file = None;
    let mut ndims = None;
    let mut element_type = None;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "NDims" => {
                ndims = Some(value.parse::<usize>().map_err(|_| Error::BadValue {
                    key: key.into(),
                    value: value.into(),
                })?)
            }
            "DimSize" => {
                let v: Vec<usize> = parse_list(key, value, 3)?;
                if v.contains(&0) {
                    return Err(Error::BadValue {
                        key: key.into(),
                        value: value.into(),
                    });
                }
                dims = Some([v[0], v[1], v[2]]);
            }
            "ElementSpacing" | "ElementSize" if key == "ElementSpacing" || spacing.is_none() => {
                let v: Vec<f64> = parse_list(key, value, 3)?;
                if v.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(Error::BadValue {
                        key: key.into(),
                        value: value.into(),
                    });
                }
                spacing = Some([v[0], v[1], v[2]]);
            }
            "Offset" | "Origin" | "Position" => {
                let v: Vec<f64> = parse_list(key, value, 3)?;
                origin = [v[0], v[1], v[2]];
            }
            "TransformMatrix" | "Rotation" | "Orientation" => {
                let v: Vec<f64> = parse_list(key, value, 9)?;
                direction = [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
            }
            "ElementType" => element_type = Some(value.to_string()),
            "ElementDataFile" => data_file = Some(value.to_string()),
            "CompressedData" => {
                if parse_bool(key, value)? {
                    return Err(Error::Unsupported("compressed MetaImage data".into()));
                }
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB"
                if parse_bool(key, value)? => {
                    return Err(Error::Unsupported("big-endian sample order".into()));
                }
            _ => {}
        }
    }

    match ndims {
        Some(3) | None => {}
        Some(n) => return Err(Error::Unsupported(format!("NDims = {n}, only 3 is supported"))),
    }
    let dims = dims.ok_or(Error::MissingKey("DimSize"))?;
    let spacing = spacing.ok_or(Error::MissingKey("ElementSpacing"))?;
    let data_file = data_file.ok_or(Error::MissingKey("ElementDataFile"))?;
    match element_type.as_deref() {
        Some("MET_SHORT") => {}
        Some(other) => {
            return Err(Error::Unsupported(format!(
                "ElementType = {other}, only MET_SHORT is supported"
            )))
        }
        None => return Err(Error::MissingKey("ElementType")),
    }
    if data_file.eq_ignore_ascii_case("LOCAL") || data_file.starts_with("LIST") {
        return Err(Error::Unsupported(format!("ElementDataFile = {data_file}")));
    }
    Ok(VolumeMeta {
        dims,
        spacing,
        origin,
        direction,
        data_file,
    })
}

/// Render a header that [`parse_mhd`] reads back to the same metadata.
pub fn serialize_mhd(meta: &VolumeMeta) -> String {
    let mut s = String::new();
    let d = &meta.direction;
    s.push_str("ObjectType = Image\nNDims = 3\nBinaryData = True\n");
    s.push_str("BinaryDataByteOrderMSB = False\nCompressedData = False\n");
    let _ = writeln!(
        s,
        "TransformMatrix = {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
        d[0][0], d[0][1], d[0][2], d[1][0], d[1][1], d[1][2], d[2][0], d[2][1], d[2][2]
    );
    let [ox, oy, oz] = meta.origin;
    let _ = writeln!(s, "Offset = {ox:?} {oy:?} {oz:?}");
    let [sx, sy, sz] = meta.spacing;
    let _ = writeln!(s, "ElementSpacing = {sx:?} {sy:?} {sz:?}");
    let [nx, ny, nz] = meta.dims;
    let _ = writeln!(s, "DimSize = {nx} {ny} {nz}");
    s.push_str("ElementType = MET_SHORT\n");
    let _ = writeln!(s, "ElementDataFile = {}", meta.data_file);
    s
}

/// A CT volume in Hounsfield units, stored z-major (x fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct CtVolume {
    pub meta: VolumeMeta,
    pub voxels: Vec<i16>,
}

/// HU range a plausible CT scan stays within.
pub const PLAUSIBLE_HU: (i16, i16) = (-1024, 3071);

impl CtVolume {
    pub fn new(meta: VolumeMeta, voxels: Vec<i16>) -> Result<Self> {
        if voxels.len() != meta.voxel_count() {
            return Err(Error::PayloadSize {
                expected: 2 * meta.voxel_count(),
                actual: 2 * voxels.len(),
            });
        }
        Ok(CtVolume { meta, voxels })
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> i16 {
        let [nx, ny, _] = self.meta.dims;
        self.voxels[(z * ny + y) * nx + x]
    }

    /// The `z`-th axial slice as `ny` rows of `nx` values.
    pub fn slice(&self, z: usize) -> &[i16] {
        let [nx, ny, _] = self.meta.dims;
        &self.voxels[z * nx * ny..(z + 1) * nx * ny]
    }

    /// Little-endian payload bytes, the inverse of [`load_volume`].
    pub fn to_raw_bytes(&self) -> Vec<u8> {
        self.voxels.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Decode a little-endian signed 16-bit payload (x fastest, then y, then z).
pub fn load_volume(meta: VolumeMeta, raw: &[u8]) -> Result<CtVolume> {
    let expected = 2 * meta.voxel_count();
    if raw.len() != expected {
        return Err(Error::PayloadSize {
            expected,
            actual: raw.len(),
        });
    }
    let voxels: Vec<i16> = raw
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    let outside = voxels
        .iter()
        .filter(|&&v| v < PLAUSIBLE_HU.0 || v > PLAUSIBLE_HU.1)
        .count();
    if outside > 0 {
        log::warn!(
            "{}: {outside} voxels outside the plausible HU range [{}, {}]",
            meta.data_file,
            PLAUSIBLE_HU.0,
            PLAUSIBLE_HU.1
        );
    }
    CtVolume::new(meta, voxels)
}

/// Read a `.mhd` header and the payload it names.
pub fn read_volume(mhd_path: &Path) -> Result<CtVolume> {
    let inner = || -> Result<CtVolume> {
        let text = std::fs::read_to_string(mhd_path)?;
        let meta = parse_mhd(&text)?;
        let raw_path = mhd_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&meta.data_file);
        let raw = std::fs::read(&raw_path).map_err(|e| Error::from(e).in_file(&raw_path))?;
        load_volume(meta, &raw)
    };
    inner().map_err(|e| match e {
        e @ Error::File { .. } => e,
        e => e.in_file(mhd_path),
    })
}

/// Write `volume` as `<dir>/<stem>.mhd` + its payload file.
pub fn write_volume(dir: &Path, stem: &str, volume: &CtVolume) -> Result<std::path::PathBuf> {
    let mhd = dir.join(format!("{stem}.mhd"));
    std::fs::write(&mhd, serialize_mhd(&volume.meta))?;
    std::fs::write(dir.join(&volume.meta.data_file), volume.to_raw_bytes())?;
    Ok(mhd)
}
