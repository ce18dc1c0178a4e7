//! Domain meshes, embedded targets and discrete maps between them.

mod degree;
mod field;
mod mesh;
mod target;

pub use degree::{degree, degree_raw, DegreeResult, DEGREE_RESIDUAL_TOL};
pub use field::{cell_gradient, cell_gradients, MapField, FIELD_TOL};
pub use mesh::{build_icosphere_mesh, build_patch_mesh, build_torus_mesh, DomainMesh, MeshKind};
pub use target::{TargetManifold, MANIFOLD_TOL};

pub(crate) use field::{apply_stencil, gather, interpolate, project_rows, quad_gradients_into, with_scratch};
pub(crate) use mesh::{cross, dot3, normalized};

use alloc::vec::Vec;

/// Nodes within geodesic distance `radius` of node `center`.
pub fn geodesic_ball_nodes(mesh: &DomainMesh, center: usize, radius: f64) -> Vec<usize> {
    mesh.nodes_within(&mesh.node(center), radius)
}

/// Nearest-point retraction onto the target.
pub fn project_to_target(target: &TargetManifold, x: &[f64]) -> crate::Result<Vec<f64>> {
    target.project(x)
}

/// Tangent-space projection at an on-target base point.
pub fn tangent_project(target: &TargetManifold, base: &[f64], v: &[f64]) -> crate::Result<Vec<f64>> {
    target.tangent_project(base, v)
}

/// Second fundamental form of the target at `base`.
pub fn second_fundamental_form(
    target: &TargetManifold,
    base: &[f64],
    x: &[f64],
    y: &[f64],
) -> crate::Result<Vec<f64>> {
    target.second_fundamental_form(base, x, y)
}
