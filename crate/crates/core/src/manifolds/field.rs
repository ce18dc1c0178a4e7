use super::mesh::DomainMesh;
use super::target::TargetManifold;
use crate::error::{Error, Result};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// Node values may deviate from the target by at most this much.
pub const FIELD_TOL: f64 = 1e-12;

/// A discrete map: one ambient vector per mesh node, on the target.
#[derive(Debug, Clone)]
pub struct MapField {
    mesh: Arc<DomainMesh>,
    target: TargetManifold,
    values: Vec<f64>,
}

impl MapField {
    /// Wraps node values, checking shape and the on-target invariant.
    pub fn new(mesh: Arc<DomainMesh>, target: TargetManifold, values: Vec<f64>) -> Result<Self> {
        target.validate()?;
        let nn = target.ambient_dim();
        if values.len() != mesh.node_count() * nn {
            return Err(Error::Shape(alloc::format!(
                "{} values for {} nodes of ambient dimension {}",
                values.len(),
                mesh.node_count(),
                nn
            )));
        }
        for (i, v) in values.chunks(nn).enumerate() {
            let d = target.distance_to(v);
            if !(d <= FIELD_TOL) {
                return Err(Error::Shape(alloc::format!(
                    "node {i} is {d:e} away from the target"
                )));
            }
        }
        Ok(MapField { mesh, target, values })
    }

    /// Evaluates `f` at every node position and retracts onto the target.
    pub fn from_fn<F>(mesh: Arc<DomainMesh>, target: TargetManifold, f: F) -> Result<Self>
    where
        F: Fn(&[f64; 3]) -> Vec<f64>,
    {
        let nn = target.ambient_dim();
        let mut values = Vec::with_capacity(mesh.node_count() * nn);
        for x in mesh.nodes() {
            let mut v = f(x);
            if v.len() != nn {
                return Err(Error::Shape(alloc::format!(
                    "map returned {} components, target needs {}",
                    v.len(),
                    nn
                )));
            }
            target.project_in_place(&mut v)?;
            values.extend_from_slice(&v);
        }
        MapField::new(mesh, target, values)
    }

    pub fn constant(mesh: Arc<DomainMesh>, target: TargetManifold, value: &[f64]) -> Result<Self> {
        let v = target.project(value)?;
        MapField::from_fn(mesh, target, |_| v.clone())
    }

    /// Same mesh and target, new values (checked).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        MapField::new(self.mesh.clone(), self.target.clone(), values)
    }

    pub(crate) fn from_parts_unchecked(mesh: Arc<DomainMesh>, target: TargetManifold, values: Vec<f64>) -> Self {
        MapField { mesh, target, values }
    }

    pub fn mesh(&self) -> &DomainMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<DomainMesh> {
        &self.mesh
    }

    pub fn target(&self) -> &TargetManifold {
        &self.target
    }

    pub fn ambient_dim(&self) -> usize {
        self.target.ambient_dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        let nn = self.ambient_dim();
        &self.values[i * nn..(i + 1) * nn]
    }

    /// `n x N` Jacobian at the centroid of cell `c`, row-major with rows
    /// indexed by the local domain direction. Sphere-valued maps are
    /// differentiated through the normalised interpolant.
    pub fn cell_gradient(&self, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.dim() * self.ambient_dim()];
        let mut scratch = vec![0.0; self.mesh.nodes_per_cell() * self.ambient_dim()];
        gradient_into(&self.mesh, &self.target, &self.values, c, &mut scratch, &mut out);
        out
    }

    /// Jacobian of the interpolant at the point `x`, in the local directions
    /// of the containing cell.
    pub fn point_gradient(&self, x: &[f64; 3]) -> Option<Vec<f64>> {
        let c = self.mesh.locate(x)?;
        let nn = self.ambient_dim();
        let mut scratch = vec![0.0; self.mesh.nodes_per_cell() * nn];
        gather(&self.mesh, &self.target, &self.values, c, &mut scratch);
        let st = self.mesh.point_stencil(c, x);
        let mut out = vec![0.0; self.mesh.dim() * nn];
        apply_stencil(&st, &scratch, self.mesh.nodes_per_cell(), self.mesh.dim(), nn, &mut out);
        if let Some(radius) = self.target.sphere_radius() {
            let mut u = vec![0.0; nn];
            interpolate(&self.mesh.interpolation_weights(c, x), &scratch, &mut u);
            project_rows(&u, radius, &mut out);
        }
        Some(out)
    }

    /// Interpolated value at a domain point, retracted onto the target.
    pub fn sample(&self, x: &[f64; 3]) -> Option<Vec<f64>> {
        let c = self.mesh.locate(x)?;
        let nn = self.ambient_dim();
        let nodes = self.mesh.cell_nodes(c);
        let w = self.mesh.interpolation_weights(c, x);
        let first = &self.values[nodes[0] * nn..(nodes[0] + 1) * nn];
        let mut acc = first.to_vec();
        let mut diff = vec![0.0; nn];
        for (a, &node) in nodes.iter().enumerate().skip(1) {
            self.target
                .difference(first, &self.values[node * nn..(node + 1) * nn], &mut diff);
            for k in 0..nn {
                acc[k] += w[a] * diff[k];
            }
        }
        self.target.project_in_place(&mut acc).ok()?;
        Some(acc)
    }
}

/// Gathers the node values of cell `c` into `scratch`, lifted so that tori
/// differences are taken relative to the first node.
#[inline]
pub(crate) fn gather(
    mesh: &DomainMesh,
    target: &TargetManifold,
    values: &[f64],
    c: usize,
    scratch: &mut [f64],
) {
    let nn = target.ambient_dim();
    let nodes = mesh.cell_nodes(c);
    let first = &values[nodes[0] * nn..(nodes[0] + 1) * nn];
    match target {
        TargetManifold::Sphere { .. } => {
            for (a, &node) in nodes.iter().enumerate() {
                scratch[a * nn..(a + 1) * nn].copy_from_slice(&values[node * nn..(node + 1) * nn]);
            }
        }
        TargetManifold::FlatTorus { .. } => {
            scratch[..nn].iter_mut().for_each(|v| *v = 0.0);
            for (a, &node) in nodes.iter().enumerate().skip(1) {
                target.difference(first, &values[node * nn..(node + 1) * nn], &mut scratch[a * nn..(a + 1) * nn]);
            }
        }
    }
}

#[inline]
pub(crate) fn apply_stencil(st: &[f64], scratch: &[f64], per_cell: usize, dim: usize, nn: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..per_cell {
        let ua = &scratch[a * nn..(a + 1) * nn];
        for k in 0..dim {
            let coef = st[a * dim + k];
            let row = &mut out[k * nn..(k + 1) * nn];
            for j in 0..nn {
                row[j] += coef * ua[j];
            }
        }
    }
}

/// Replaces the rows of the linear Jacobian `grad` by those of the projected
/// interpolant `radius * U / |U|` at a point where the linear interpolant is `U`.
#[inline]
pub(crate) fn project_rows(u: &[f64], radius: f64, grad: &mut [f64]) {
    let nn = u.len();
    let r2: f64 = u.iter().map(|v| v * v).sum();
    if !(r2 > 0.0) {
        grad.iter_mut().for_each(|v| *v = f64::INFINITY);
        return;
    }
    let inv = radius / crate::math::sqrt(r2);
    for row in grad.chunks_mut(nn) {
        let c: f64 = row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / r2;
        for (g, ui) in row.iter_mut().zip(u) {
            *g = (*g - c * ui) * inv;
        }
    }
}

/// Linear interpolant `sum_a shape[a] u_a` of gathered node values.
#[inline]
pub(crate) fn interpolate(shape: &[f64], scratch: &[f64], out: &mut [f64]) {
    let nn = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (a, &w) in shape.iter().enumerate() {
        for j in 0..nn {
            out[j] += w * scratch[a * nn + j];
        }
    }
}

/// Centroid Jacobian of cell `c`: of the linear interpolant on flat tori and
/// of its normalisation on spheres.
#[inline]
pub(crate) fn gradient_into(
    mesh: &DomainMesh,
    target: &TargetManifold,
    values: &[f64],
    c: usize,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let nn = target.ambient_dim();
    let per = mesh.nodes_per_cell();
    gather(mesh, target, values, c, scratch);
    apply_stencil(mesh.stencil(c), scratch, per, mesh.dim(), nn, out);
    if let Some(radius) = target.sphere_radius() {
        let mut u = [0.0; 8];
        let w = [1.0 / per as f64; 8];
        interpolate(&w[..per], scratch, &mut u[..nn]);
        project_rows(&u[..nn], radius, out);
    }
}

/// Jacobians at every quadrature point of cell `c`, concatenated into `out`,
/// with the same convention as [`gradient_into`].
#[inline]
pub(crate) fn quad_gradients_into(
    mesh: &DomainMesh,
    target: &TargetManifold,
    values: &[f64],
    c: usize,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let nn = target.ambient_dim();
    let dim = mesh.dim();
    let width = dim * nn;
    let sphere = target.sphere_radius();
    gather(mesh, target, values, c, scratch);
    for q in 0..mesh.quad_count() {
        let g = &mut out[q * width..(q + 1) * width];
        apply_stencil(mesh.quad_stencil(c, q), scratch, mesh.nodes_per_cell(), dim, nn, g);
        if let Some(radius) = sphere {
            let mut u = [0.0; 8];
            interpolate(mesh.quad_shape(q), scratch, &mut u[..nn]);
            project_rows(&u[..nn], radius, g);
        }
    }
}

/// Jacobians of every cell, concatenated.
pub fn cell_gradients(field: &MapField) -> Vec<f64> {
    let mesh = field.mesh();
    let width = mesh.dim() * field.ambient_dim();
    let mut out = vec![0.0; mesh.cell_count() * width];
    let per = mesh.nodes_per_cell() * field.ambient_dim();
    crate::par::fill_chunks(&mut out, width, |c, chunk| {
        with_scratch(per, |scratch| {
            gradient_into(mesh, field.target(), field.values(), c, scratch, chunk)
        });
    });
    out
}

/// Free-function form of [`MapField::cell_gradient`].
pub fn cell_gradient(field: &MapField, c: usize) -> Vec<f64> {
    field.cell_gradient(c)
}

/// Runs `f` with a zeroed buffer of length `len`, on the stack when small.
#[inline]
pub(crate) fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    if len <= 160 {
        let mut buf = [0.0; 160];
        f(&mut buf[..len])
    } else {
        let mut buf = vec![0.0; len];
        f(&mut buf)
    }
}
