//! World (mm) ↔ voxel coordinate conversion.
//!
//! `world = direction · (voxel ⊙ spacing) + origin`, and the inverse
//! `voxel = (direction⁻¹ · (world − origin)) ⊘ spacing`.

use super::VolumeMeta;
use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

const SINGULAR_EPS: f64 = 1e-9;

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse through the adjugate; fails when `|det| ≤ 1e-9`.
pub fn invert3(m: &Mat3) -> Result<Mat3> {
    let det = det3(m);
    if !(det.abs() > SINGULAR_EPS) {
        return Err(Error::SingularDirection(det.abs()));
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    // adj(m)[i][j] = cofactor(m)[j][i]
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / det;
        }
    }
    Ok(inv)
}

fn mul_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Continuous voxel coordinates `(vx, vy, vz)` of a world point in mm.
pub fn world_to_voxel(p_mm: [f64; 3], meta: &VolumeMeta) -> Result<[f64; 3]> {
    let inv = invert3(&meta.direction)?;
    let d = [
        p_mm[0] - meta.origin[0],
        p_mm[1] - meta.origin[1],
        p_mm[2] - meta.origin[2],
    ];
    let r = mul_vec(&inv, d);
    Ok([
        r[0] / meta.spacing[0],
        r[1] / meta.spacing[1],
        r[2] / meta.spacing[2],
    ])
}

/// World position in mm of continuous voxel coordinates.
pub fn voxel_to_world(v: [f64; 3], meta: &VolumeMeta) -> [f64; 3] {
    let scaled = [
        v[0] * meta.spacing[0],
        v[1] * meta.spacing[1],
        v[2] * meta.spacing[2],
    ];
    let r = mul_vec(&meta.direction, scaled);
    [
        r[0] + meta.origin[0],
        r[1] + meta.origin[1],
        r[2] + meta.origin[2],
    ]
}
