use super::field::{gradient_into, with_scratch, MapField};
use super::mesh::{cross, dot3};
use super::target::TargetManifold;
use crate::error::{Error, Result};
use crate::math::{atan2, round, sqrt};
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Raw values further than this from an integer are rejected.
pub const DEGREE_RESIDUAL_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub degree: i64,
    /// Normalised integral of the pulled-back volume form.
    pub raw: f64,
    /// `|raw - degree|`
    pub residual: f64,
}

/// Signed solid angle of the geodesic triangle with unit vertices `a, b, c`.
#[inline]
fn solid_angle(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let det = dot3(a, &cross(b, c));
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    2.0 * atan2(det, den)
}

fn unit3(v: &[f64]) -> [f64; 3] {
    let l = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / l, v[1] / l, v[2] / l]
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut total = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0; 3]; 3];
        for r in 1..4 {
            let mut k = 0;
            for c in 0..4 {
                if c != col {
                    minor[r - 1][k] = m[r][c];
                    k += 1;
                }
            }
        }
        let d3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
            - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
            + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][col] * d3;
    }
    total
}

/// Unrounded degree of a map into `S^n` from an `n`-dimensional domain.
pub fn degree_raw(field: &MapField) -> Result<f64> {
    let mesh = field.mesh();
    let n = mesh.dim();
    match field.target() {
        TargetManifold::Sphere { dim, .. } if *dim == n => {}
        _ => return Err(Error::DegreeUnsupported),
    }
    let values = field.values();
    if n == 2 {
        // Grid quads list their corners in bit order (x fastest), so the
        // counter-clockwise split is (00, 10, 11) and (00, 11, 01).
        let pieces: &[[usize; 3]] = if mesh.nodes_per_cell() == 3 {
            &[[0, 1, 2]]
        } else {
            &[[0, 1, 3], [0, 3, 2]]
        };
        let per_cell = crate::par::map_indexed(mesh.cell_count(), |c| {
            let nodes = mesh.cell_nodes(c);
            pieces
                .iter()
                .map(|t| {
                    let u = |k: usize| unit3(&values[nodes[t[k]] * 3..nodes[t[k]] * 3 + 3]);
                    solid_angle(&u(0), &u(1), &u(2))
                })
                .sum::<f64>()
        });
        Ok(per_cell.iter().sum::<f64>() / (4.0 * PI))
    } else {
        let per_cell = crate::par::map_indexed(mesh.cell_count(), |c| {
            let mut grad = [0.0; 12];
            with_scratch(mesh.nodes_per_cell() * 4, |scratch| {
                gradient_into(mesh, field.target(), values, c, scratch, &mut grad)
            });
            let mut mean = [0.0; 4];
            for &node in mesh.cell_nodes(c) {
                for k in 0..4 {
                    mean[k] += values[node * 4 + k];
                }
            }
            let l = sqrt(mean.iter().map(|v| v * v).sum());
            let mut m = [[0.0; 4]; 4];
            for k in 0..4 {
                m[0][k] = mean[k] / l;
                m[1][k] = grad[k];
                m[2][k] = grad[4 + k];
                m[3][k] = grad[8 + k];
            }
            mesh.cell_volume(c) * det4(&m)
        });
        Ok(per_cell.iter().sum::<f64>() / (2.0 * PI * PI))
    }
}

/// Degree of a sphere-valued map, rejecting unresolved values.
pub fn degree(field: &MapField) -> Result<DegreeResult> {
    let raw = degree_raw(field)?;
    let nearest = round(raw);
    let residual = (raw - nearest).abs();
    if !(residual <= DEGREE_RESIDUAL_TOL) {
        return Err(Error::DegreeUnresolved { raw, residual });
    }
    Ok(DegreeResult {
        degree: nearest as i64,
        raw,
        residual,
    })
}
