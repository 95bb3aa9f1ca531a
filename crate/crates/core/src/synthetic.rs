//! Deterministic synthetic CT volumes with spherical nodules, for demos,
//! tests and benchmarks.

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::ct_io::{voxel_to_world, write_annotations_csv, write_volume, CtVolume, NoduleAnnotation, VolumeMeta, IDENTITY};
use crate::error::Result;

/// A nodule placed in voxel space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoduleSpec {
    pub center_voxel: [f64; 3],
    pub diameter_mm: f64,
}

/// One synthetic scan.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeSpec {
    pub series_uid: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub nodules: Vec<NoduleSpec>,
}

const AIR_HU: i32 = -1000;
const LUNG_HU: i32 = -820;
const TISSUE_HU: i32 = 40;
const NODULE_HU: i32 = 60;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u32() >> 8) as f64 / (1u32 << 24) as f64
}

/// Render a volume: air outside an elliptical body, soft tissue wall, lung
/// parenchyma inside, solid spheres for nodules, plus ±20 HU noise.
pub fn render_volume(spec: &VolumeSpec, seed: u64) -> Result<CtVolume> {
    let [nx, ny, nz] = spec.dims;
    let meta = VolumeMeta {
        dims: spec.dims,
        spacing: spec.spacing,
        origin: spec.origin,
        direction: IDENTITY,
        data_file: format!("{}.raw", spec.series_uid),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (nx as f64 / 2.0, ny as f64 / 2.0);
    let mut voxels = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let ex = (x as f64 + 0.5 - cx) / (0.48 * nx as f64);
                let ey = (y as f64 + 0.5 - cy) / (0.42 * ny as f64);
                let r = (ex * ex + ey * ey).sqrt();
                let mut hu = if r > 1.0 {
                    AIR_HU
                } else if r > 0.85 {
                    TISSUE_HU
                } else {
                    LUNG_HU
                };
                for n in &spec.nodules {
                    let d = [x as f64, y as f64, z as f64];
                    let dist2: f64 = (0..3)
                        .map(|k| ((d[k] - n.center_voxel[k]) * spec.spacing[k]).powi(2))
                        .sum();
                    if dist2.sqrt() <= n.diameter_mm / 2.0 {
                        hu = NODULE_HU;
                    }
                }
                let noise = (unit(&mut rng) * 40.0 - 20.0).round() as i32;
                voxels.push((hu + noise).clamp(-1024, 3071) as i16);
            }
        }
    }
    CtVolume::new(meta, voxels)
}

/// World-space annotations of the nodules in `spec`.
pub fn annotations_for(spec: &VolumeSpec) -> Vec<NoduleAnnotation> {
    let meta = VolumeMeta {
        dims: spec.dims,
        spacing: spec.spacing,
        origin: spec.origin,
        direction: IDENTITY,
        data_file: String::new(),
    };
    spec.nodules
        .iter()
        .map(|n| NoduleAnnotation {
            series_uid: spec.series_uid.clone(),
            world: voxel_to_world(n.center_voxel, &meta),
            diameter_mm: n.diameter_mm,
        })
        .collect()
}

/// The standard fixture: three 64×64×8 scans holding five nodules in total.
pub fn fixture_specs() -> Vec<VolumeSpec> {
    let base = |uid: &str, origin: [f64; 3], nodules: Vec<NoduleSpec>| VolumeSpec {
        series_uid: uid.to_string(),
        dims: [64, 64, 8],
        spacing: [0.7, 0.7, 2.5],
        origin,
        nodules,
    };
    let n = |x: f64, y: f64, z: f64, d: f64| NoduleSpec { center_voxel: [x, y, z], diameter_mm: d };
    vec![
        base(
            "1.3.6.1.4.1.9328.50.1.0001",
            [-22.4, -22.4, -100.0],
            vec![n(20.0, 24.0, 3.0, 6.0), n(42.0, 38.0, 5.0, 9.0)],
        ),
        base(
            "1.3.6.1.4.1.9328.50.1.0002",
            [-30.0, -18.5, -250.0],
            vec![n(30.0, 30.0, 4.0, 12.0), n(18.0, 44.0, 2.0, 5.0)],
        ),
        base("1.3.6.1.4.1.9328.50.1.0003", [0.0, 0.0, 0.0], vec![n(36.0, 22.0, 4.0, 7.5)]),
    ]
}

/// Paths written by [`write_fixture`].
#[derive(Clone, Debug, PartialEq)]
pub struct FixturePaths {
    pub scans_dir: PathBuf,
    pub annotations: PathBuf,
}

/// Write `specs` under `root/scans/` and their annotations to
/// `root/annotations.csv`. Volume `i` uses noise seed `seed + i`.
pub fn write_fixture(root: &Path, specs: &[VolumeSpec], seed: u64) -> Result<FixturePaths> {
    let scans_dir = root.join("scans");
    std::fs::create_dir_all(&scans_dir)?;
    let mut annotations = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let vol = render_volume(spec, seed.wrapping_add(i as u64))?;
        write_volume(&scans_dir, &spec.series_uid, &vol)?;
        annotations.extend(annotations_for(spec));
    }
    let csv_path = root.join("annotations.csv");
    std::fs::write(&csv_path, write_annotations_csv(&annotations))?;
    Ok(FixturePaths { scans_dir, annotations: csv_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ct_io::world_to_voxel;

    #[test]
    fn fixture_counts() {
        let specs = fixture_specs();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs.iter().map(|s| s.nodules.len()).sum::<usize>(), 5);
    }

    #[test]
    fn nodule_is_dense_and_annotation_maps_back() {
        let spec = &fixture_specs()[0];
        let vol = render_volume(spec, 1).unwrap();
        assert!(vol.get(20, 24, 3) > 0);
        assert!(vol.get(32, 12, 0) < -700);
        assert!(vol.get(0, 0, 0) < -900);
        let a = &annotations_for(spec)[1];
        let v = world_to_voxel(a.world, &vol.meta).unwrap();
        for k in 0..3 {
            assert!((v[k] - spec.nodules[1].center_voxel[k]).abs() < 1e-9);
        }
        assert_eq!(render_volume(spec, 1).unwrap(), vol);
    }
}
