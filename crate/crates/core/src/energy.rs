//! Discrete energies, their exact gradients and the entropy functional.
//!
//! Every functional is a sum over cells and their quadrature points of
//! `(volume / Q) * density(G_q)`, so the gradients below are the exact
//! derivatives of the discrete sums.

use crate::kernel::{integrand_sq, pow_change, weight, GrowthParams};
use crate::manifolds::{
    apply_stencil, gather, interpolate, project_rows, quad_gradients_into, with_scratch, DomainMesh, MapField,
    TargetManifold,
};
use crate::math::{gpow, ln, norm_sq, sqrt};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    pub per_cell: Vec<f64>,
}

/// One ambient vector per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub ambient_dim: usize,
    pub values: Vec<f64>,
}

impl GradientField {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.ambient_dim
    }
}

fn check_params(mesh: &DomainMesh, target: &TargetManifold, params: &GrowthParams) {
    assert_eq!(params.n, mesh.dim(), "params.n must equal the mesh dimension");
    assert_eq!(
        params.target_dim,
        target.ambient_dim(),
        "params.target_dim must equal the target's ambient dimension"
    );
}

/// `sum_q (volume / Q) * density(|G_q|^2)` for every cell.
pub(crate) fn per_cell_density<F>(mesh: &DomainMesh, target: &TargetManifold, values: &[f64], density: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let width = mesh.dim() * target.ambient_dim();
    let nq = mesh.quad_count();
    let per = mesh.nodes_per_cell() * target.ambient_dim();
    crate::par::map_indexed(mesh.cell_count(), |c| {
        let sum = with_scratch(per + nq * width, |buf| {
            let (scratch, grad) = buf.split_at_mut(per);
            quad_gradients_into(mesh, target, values, c, scratch, grad);
            grad.chunks(width).map(|g| density(norm_sq(g))).sum::<f64>()
        });
        mesh.cell_volume(c) * sum / nq as f64
    })
}

/// `|G_q|^2` at every quadrature point, `Q` entries per cell.
pub(crate) fn point_sq_norms(mesh: &DomainMesh, target: &TargetManifold, values: &[f64]) -> Vec<f64> {
    let nn = target.ambient_dim();
    let nq = mesh.quad_count();
    let width = mesh.dim() * nn;
    let per = mesh.nodes_per_cell() * nn;
    let mut out = vec![0.0; mesh.cell_count() * nq];
    crate::par::fill_chunks(&mut out, nq, |c, chunk| {
        with_scratch(per + nq * width, |buf| {
            let (scratch, grads) = buf.split_at_mut(per);
            quad_gradients_into(mesh, target, values, c, scratch, grads);
            for (t, g) in chunk.iter_mut().zip(grads.chunks(width)) {
                *t = norm_sq(g);
            }
        });
    });
    out
}

/// `E(new) - E(old)` summed from per-point increments, so that decrements far
/// below the rounding level of `E` itself are still resolved. `old_t` and
/// `new_t` are the outputs of [`point_sq_norms`].
pub(crate) fn energy_change(mesh: &DomainMesh, params: &GrowthParams, old_t: &[f64], new_t: &[f64]) -> f64 {
    let nq = mesh.quad_count();
    let n = params.nf();
    let changes = crate::par::map_indexed(mesh.cell_count(), |c| {
        let mut sum = 0.0;
        for q in c * nq..(c + 1) * nq {
            let base = params.delta + old_t[q];
            let inner = pow_change(base, new_t[q] - old_t[q], 0.5 * n);
            let outer = params.s + gpow(base, 0.5 * n);
            sum += pow_change(outer, inner, params.p / n);
        }
        mesh.cell_volume(c) * sum / (nq as f64 * params.p)
    });
    changes.iter().sum()
}

/// Quadrature sum of `integrand(G)` over the domain.
pub fn total_energy(field: &MapField, params: &GrowthParams) -> EnergyReport {
    check_params(field.mesh(), field.target(), params);
    let per_cell = per_cell_density(field.mesh(), field.target(), field.values(), |t| {
        integrand_sq(t, params)
    });
    EnergyReport {
        total: per_cell.iter().sum(),
        per_cell,
    }
}

/// [`total_energy`] of arbitrary node values, on or off the target. This is
/// the function whose exact gradient [`euclidean_gradient`] returns.
pub fn energy_of_values(mesh: &DomainMesh, target: &TargetManifold, values: &[f64], params: &GrowthParams) -> f64 {
    check_params(mesh, target, params);
    assert_eq!(values.len(), mesh.node_count() * target.ambient_dim(), "one value per node");
    per_cell_density(mesh, target, values, |t| integrand_sq(t, params)).iter().sum()
}

/// Per-cell quadrature of `|G|^n / n`.
pub fn dirichlet_per_cell(field: &MapField, n: usize) -> Vec<f64> {
    let nf = n as f64;
    per_cell_density(field.mesh(), field.target(), field.values(), |t| {
        gpow(t, 0.5 * nf) / nf
    })
}

/// Quadrature of `|G|^n / n` over the domain.
pub fn dirichlet_energy(field: &MapField, n: usize) -> f64 {
    dirichlet_per_cell(field, n).iter().sum()
}

/// Per-cell contributions `sum_q (volume / Q) * w(|G_q|^2) * dG_q/du . G_q`,
/// then a scatter in cell order. On spheres `G_q` is the Jacobian of the
/// normalised interpolant and the chain rule runs through the normalisation.
pub(crate) fn gradient_values(
    mesh: &DomainMesh,
    target: &TargetManifold,
    values: &[f64],
    params: &GrowthParams,
) -> Vec<f64> {
    let nn = target.ambient_dim();
    let dim = mesh.dim();
    let nq = mesh.quad_count();
    let npc = mesh.nodes_per_cell();
    let per = npc * nn;
    let width = dim * nn;
    let radius = target.sphere_radius();
    let mut contrib = vec![0.0; mesh.cell_count() * per];
    crate::par::fill_chunks(&mut contrib, per, |c, out| {
        with_scratch(per + 2 * width + 2 * nn, |buf| {
            let (scratch, rest) = buf.split_at_mut(per);
            let (raw, rest) = rest.split_at_mut(width);
            let (proj, rest) = rest.split_at_mut(width);
            let (u, du) = rest.split_at_mut(nn);
            gather(mesh, target, values, c, scratch);
            let vq = mesh.cell_volume(c) / nq as f64;
            for q in 0..nq {
                let st = mesh.quad_stencil(c, q);
                apply_stencil(st, scratch, npc, dim, nn, raw);
                // d|G|^2/dg_k = 2 a g_k' and d|G|^2/dU = du, with g' the
                // projected rows.
                let a = match radius {
                    None => {
                        proj.copy_from_slice(raw);
                        du.iter_mut().for_each(|v| *v = 0.0);
                        1.0
                    }
                    Some(rad) => {
                        interpolate(mesh.quad_shape(q), scratch, u);
                        let r2 = norm_sq(u);
                        let r = sqrt(r2);
                        proj.copy_from_slice(raw);
                        project_rows(u, rad, proj);
                        let mut g2 = 0.0;
                        let mut c2 = 0.0;
                        du.iter_mut().for_each(|v| *v = 0.0);
                        for row in raw.chunks(nn) {
                            let ck: f64 = row.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
                            g2 += norm_sq(row);
                            c2 += ck * ck;
                            for j in 0..nn {
                                du[j] -= 2.0 * ck * row[j];
                            }
                        }
                        let k2 = rad * rad / (r2 * r2);
                        for j in 0..nn {
                            du[j] = k2 * (du[j] + (4.0 * c2 / r2 - 2.0 * g2) * u[j]);
                        }
                        rad / r
                    }
                };
                let f = vq * weight(norm_sq(proj), params);
                let shape = mesh.quad_shape(q);
                for b in 0..npc {
                    for j in 0..nn {
                        let mut acc = 0.5 * shape[b] * du[j];
                        for k in 0..dim {
                            acc += a * st[b * dim + k] * proj[k * nn + j];
                        }
                        out[b * nn + j] += f * acc;
                    }
                }
            }
        });
    });
    let mut g = vec![0.0; mesh.node_count() * nn];
    for c in 0..mesh.cell_count() {
        for (a, &node) in mesh.cell_nodes(c).iter().enumerate() {
            for j in 0..nn {
                g[node * nn + j] += contrib[c * per + a * nn + j];
            }
        }
    }
    g
}

/// Exact gradient of [`total_energy`] with respect to unconstrained node values.
pub fn euclidean_gradient(field: &MapField, params: &GrowthParams) -> GradientField {
    check_params(field.mesh(), field.target(), params);
    GradientField {
        ambient_dim: field.ambient_dim(),
        values: gradient_values(field.mesh(), field.target(), field.values(), params),
    }
}

pub(crate) fn project_gradient(target: &TargetManifold, values: &[f64], g: &mut [f64]) {
    let nn = target.ambient_dim();
    for (gi, ui) in g.chunks_mut(nn).zip(values.chunks(nn)) {
        target.tangent_project_in_place(ui, gi);
    }
}

/// [`euclidean_gradient`] projected nodewise onto the target's tangent spaces.
pub fn tangent_gradient(field: &MapField, params: &GrowthParams) -> GradientField {
    let mut g = euclidean_gradient(field, params);
    project_gradient(field.target(), field.values(), &mut g.values);
    g
}

/// Quadrature of `(1 + a)^{p/n} log(1 + a)` with `a = (delta + |G|^2)^{n/2}`.
/// The phase constant is fixed to 1 regardless of `params.s`.
pub fn entropy(field: &MapField, params: &GrowthParams) -> f64 {
    entropy_per_cell(field, params).iter().sum()
}

pub fn entropy_per_cell(field: &MapField, params: &GrowthParams) -> Vec<f64> {
    check_params(field.mesh(), field.target(), params);
    let n = params.nf();
    per_cell_density(field.mesh(), field.target(), field.values(), |t| {
        let a = 1.0 + gpow(params.delta + t, 0.5 * n);
        gpow(a, params.p / n) * ln(a)
    })
}

/// Energy of the cells whose centroid lies within `radius` of node `center`.
pub fn local_energy(field: &MapField, params: &GrowthParams, center: usize, radius: f64) -> f64 {
    let report = total_energy(field, params);
    ball_sum(field.mesh(), &report.per_cell, &field.mesh().node(center), radius)
}

/// Sum of `per_cell` over the cells with centroid in the closed ball.
pub fn ball_sum(mesh: &DomainMesh, per_cell: &[f64], center: &[f64; 3], radius: f64) -> f64 {
    if radius < 0.0 {
        return 0.0;
    }
    mesh.cells_within(center, radius)
        .iter()
        .map(|(c, _)| per_cell[*c])
        .sum()
}

/// Sum of `per_cell` over the cells with centroid distance in `(r_in, r_out]`.
pub fn annulus_sum(mesh: &DomainMesh, per_cell: &[f64], center: &[f64; 3], r_in: f64, r_out: f64) -> f64 {
    if r_out <= r_in {
        return 0.0;
    }
    mesh.cells_within(center, r_out)
        .iter()
        .filter(|(_, d)| *d > r_in)
        .map(|(c, _)| per_cell[*c])
        .sum()
}
