//! Bubbling diagnostics along a continuation run: concentration functions,
//! rescaled maps, neck and tangential energies, the Hopf-type balance and
//! the energy-identity report.

use crate::energy::{dirichlet_per_cell, total_energy};
use crate::error::{invalid, Error, Result};
use crate::kernel::{weight, GrowthParams};
use crate::manifolds::{
    build_patch_mesh, dot3, normalized, quad_gradients_into, DomainMesh, MapField, MeshKind,
};
use crate::math::{cos, floor, gpow, sin, sqrt};
use crate::solver::{ContinuationRun, TraceRow};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Sampled maximal concentration function `F(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationScan {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub node: usize,
    pub radius: f64,
    /// `F(radius)`, at least the threshold.
    pub value: f64,
}

/// Ball sums over every node at a fixed radius.
struct BallSums<'a> {
    mesh: &'a DomainMesh,
    per_cell: &'a [f64],
    total: f64,
}

impl<'a> BallSums<'a> {
    fn new(mesh: &'a DomainMesh, per_cell: &'a [f64]) -> Self {
        BallSums {
            mesh,
            per_cell,
            total: per_cell.iter().sum(),
        }
    }

    fn max(&self, radius: f64) -> (f64, usize) {
        if radius >= self.mesh.diameter() {
            return (self.total, 0);
        }
        if radius < 0.0 {
            return (0.0, 0);
        }
        let sums = if self.mesh.kind().is_periodic() {
            self.periodic_sums(radius)
        } else {
            crate::par::map_indexed(self.mesh.node_count(), |i| {
                self.mesh
                    .cells_within(&self.mesh.node(i), radius)
                    .iter()
                    .map(|(c, _)| self.per_cell[*c])
                    .sum()
            })
        };
        let mut best = (sums[0], 0);
        for (i, &v) in sums.iter().enumerate().skip(1) {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// On a uniform torus every node sees the same set of cell offsets.
    fn periodic_sums(&self, radius: f64) -> Vec<f64> {
        let mesh = self.mesh;
        let dim = mesh.dim();
        let m = mesh.resolution();
        let h = mesh.side() / m as f64;
        let l = mesh.side();
        let mut offsets = Vec::new();
        let total = m.pow(dim as u32);
        for flat in 0..total {
            let mut rest = flat;
            let mut d2 = 0.0;
            let mut idx = [0usize; 3];
            for slot in idx.iter_mut().take(dim) {
                let o = rest % m;
                rest /= m;
                *slot = o;
                let mut d = (o as f64 + 0.5) * h;
                d -= l * floor(d / l + 0.5);
                d2 += d * d;
            }
            if sqrt(d2) <= radius {
                offsets.push(idx);
            }
        }
        crate::par::map_indexed(mesh.node_count(), |i| {
            let mut base = [0usize; 3];
            let mut rest = i;
            for slot in base.iter_mut().take(dim) {
                *slot = rest % m;
                rest /= m;
            }
            offsets
                .iter()
                .map(|o| {
                    let mut flat = 0usize;
                    for k in (0..dim).rev() {
                        flat = flat * m + (base[k] + o[k]) % m;
                    }
                    self.per_cell[flat]
                })
                .sum()
        })
    }
}

/// `F(R)` at each radius, with the realising node.
pub fn concentration_scan(field: &MapField, params: &GrowthParams, radii: &[f64]) -> ConcentrationScan {
    let per_cell = total_energy(field, params).per_cell;
    let sums = BallSums::new(field.mesh(), &per_cell);
    let mut values = Vec::with_capacity(radii.len());
    let mut argmax = Vec::with_capacity(radii.len());
    for &r in radii {
        let (v, i) = sums.max(r);
        values.push(v);
        argmax.push(i);
    }
    ConcentrationScan {
        radii: radii.to_vec(),
        values,
        argmax,
    }
}

/// `max_y E(u; B_R(y))` over nodes `y`, lowest index on ties.
pub fn max_concentration(field: &MapField, params: &GrowthParams, radius: f64) -> Result<(f64, usize)> {
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let per_cell = total_energy(field, params).per_cell;
    Ok(BallSums::new(field.mesh(), &per_cell).max(radius))
}

/// Smallest `R` with `F(R) >= threshold`, to within `1e-3` mesh spacings.
pub fn concentration_radius(field: &MapField, params: &GrowthParams, threshold: f64) -> Result<Option<Concentration>> {
    let per_cell = total_energy(field, params).per_cell;
    concentration_radius_from(field.mesh(), &per_cell, threshold)
}

fn concentration_radius_from(mesh: &DomainMesh, per_cell: &[f64], threshold: f64) -> Result<Option<Concentration>> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(invalid("threshold", "must be positive and finite"));
    }
    let sums = BallSums::new(mesh, per_cell);
    let mut hi = mesh.diameter();
    let (top, node) = sums.max(hi);
    if top < threshold {
        return Ok(None);
    }
    let mut best = Concentration {
        node,
        radius: hi,
        value: top,
    };
    let mut lo = 0.0;
    let tol = 1e-3 * mesh.spacing();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (v, i) = sums.max(mid);
        if v >= threshold {
            hi = mid;
            best = Concentration {
                node: i,
                radius: mid,
                value: v,
            };
        } else {
            lo = mid;
        }
    }
    Ok(Some(best))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescaleConfig {
    /// Chart half-width in rescaled units.
    pub k: f64,
    /// Cells per chart side.
    pub resolution: usize,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        RescaleConfig { k: 8.0, resolution: 64 }
    }
}

/// `v(x) = u(center + r x)` on the chart `[-K, K]^n` with its parameters.
#[derive(Debug, Clone)]
pub struct RescaledMap {
    pub field: MapField,
    pub params: GrowthParams,
    pub r: f64,
}

impl RescaledMap {
    /// `E(u; B_r(center)) = r^{n - p} E'(v; B_1)`.
    pub fn original_ball_energy(&self, rescaled_energy: f64) -> f64 {
        gpow(self.r, self.params.nf() - self.params.p) * rescaled_energy
    }
}

/// Point of the domain at chart coordinates `x` around node `center`.
fn chart_point(mesh: &DomainMesh, center: &[f64; 3], frame: &[[f64; 3]; 2], x: &[f64; 3]) -> [f64; 3] {
    if mesh.kind() == MeshKind::Icosphere2 {
        let c = normalized(center);
        let rho = sqrt(x[0] * x[0] + x[1] * x[1]);
        if rho == 0.0 {
            return c;
        }
        let (s, co) = (sin(rho), cos(rho));
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = co * c[k] + s * (x[0] * frame[0][k] + x[1] * frame[1][k]) / rho;
        }
        out
    } else {
        let mut out = *center;
        for k in 0..mesh.dim() {
            out[k] += x[k];
        }
        out
    }
}

/// Orthonormal tangent frame at a point of the unit sphere.
fn sphere_frame(c: &[f64; 3]) -> [[f64; 3]; 2] {
    let c = normalized(c);
    let seed = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot3(&seed, &c);
    let e1 = normalized(&[seed[0] - d * c[0], seed[1] - d * c[1], seed[2] - d * c[2]]);
    let e2 = crate::manifolds::cross(&c, &e1);
    [e1, e2]
}

/// Samples the rescaled map of `field` at node `center` and scale `r`.
pub fn rescale_map(
    field: &MapField,
    center: usize,
    r: f64,
    params: &GrowthParams,
    config: &RescaleConfig,
) -> Result<RescaledMap> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", "must be positive and finite"));
    }
    if !(config.k > 0.0) || config.resolution < 2 || config.resolution % 2 != 0 {
        return Err(invalid("rescale", "need k > 0 and an even resolution"));
    }
    let mesh = field.mesh();
    let reach = config.k * r;
    let n = mesh.dim();
    let c = mesh.node(center);
    match mesh.kind() {
        MeshKind::Torus2 | MeshKind::Torus3 => {
            if reach > 0.5 * mesh.side() {
                return Err(Error::ChartOverflow { radius: reach });
            }
        }
        MeshKind::Patch2 | MeshKind::Patch3 => {
            let o = mesh.origin();
            for k in 0..n {
                if c[k] - reach < o[k] - 1e-12 || c[k] + reach > o[k] + mesh.side() + 1e-12 {
                    return Err(Error::ChartOverflow { radius: reach });
                }
            }
        }
        MeshKind::Icosphere2 => {
            if reach * sqrt(2.0) >= PI {
                return Err(Error::ChartOverflow { radius: reach });
            }
        }
    }
    let frame = if mesh.kind() == MeshKind::Icosphere2 {
        sphere_frame(&c)
    } else {
        [[0.0; 3]; 2]
    };
    let chart = Arc::new(build_patch_mesh(n, config.resolution, 2.0 * config.k, [0.0; 3])?);
    let nn = field.ambient_dim();
    let mut values = Vec::with_capacity(chart.node_count() * nn);
    for x in chart.nodes() {
        let y = chart_point(mesh, &c, &frame, &[r * x[0], r * x[1], r * x[2]]);
        let v = field
            .sample(&y)
            .ok_or(Error::ChartOverflow { radius: reach })?;
        values.extend_from_slice(&v);
    }
    Ok(RescaledMap {
        field: MapField::new(chart, field.target().clone(), values)?,
        params: params.rescaled(r),
        r,
    })
}

/// `E(u; A(r_in, r_out))` over cells with centroid in the annulus.
pub fn neck_energy(field: &MapField, params: &GrowthParams, center: usize, r_in: f64, r_out: f64) -> Result<f64> {
    if !(r_in > 0.0 && r_in <= r_out) {
        return Err(invalid("r_in", "need 0 < r_in <= r_out"));
    }
    let per_cell = total_energy(field, params).per_cell;
    Ok(crate::energy::annulus_sum(
        field.mesh(),
        &per_cell,
        &field.mesh().node(center),
        r_in,
        r_out,
    ))
}

/// `r_k^{n - p_k}` per step; steps without a radius give `None`.
pub fn radii_exponent_trace(n: usize, steps: &[(Option<f64>, f64)]) -> Vec<Option<f64>> {
    steps
        .iter()
        .map(|(r, p)| r.map(|r| radii_exponent(r, n, *p)))
        .collect()
}

pub fn radii_exponent(r: f64, n: usize, p: f64) -> f64 {
    gpow(r, n as f64 - p)
}

/// Ambient direction vectors of the local gradient rows of cell `c`.
fn local_directions(mesh: &DomainMesh, c: usize) -> [[f64; 3]; 3] {
    if mesh.kind() == MeshKind::Icosphere2 {
        let f = mesh.frame(c);
        [f[0], f[1], [0.0; 3]]
    } else {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }
}

/// `(|d_r u|^2, |grad u|^2)` for a local Jacobian at `x`.
fn radial_split(mesh: &DomainMesh, c: usize, center: &[f64; 3], x: &[f64; 3], grad: &[f64], nn: usize) -> (f64, f64) {
    let t: f64 = grad.iter().map(|v| v * v).sum();
    let Some(er) = mesh.radial_direction(center, x) else {
        return (0.0, t);
    };
    let dirs = local_directions(mesh, c);
    let mut rad2 = 0.0;
    for j in 0..nn {
        let mut d = 0.0;
        for k in 0..mesh.dim() {
            d += dot3(&er, &dirs[k]) * grad[k * nn + j];
        }
        rad2 += d * d;
    }
    (rad2.min(t), t)
}

/// Calls `f(position, weight, jacobian, cell)` at every quadrature point of
/// the cells whose centroid lies within `reach` of `center`.
fn for_quad_points<F>(field: &MapField, center: &[f64; 3], reach: f64, mut f: F)
where
    F: FnMut(&[f64; 3], f64, &[f64], usize),
{
    let mesh = field.mesh();
    let nn = field.ambient_dim();
    let width = mesh.dim() * nn;
    let nq = mesh.quad_count();
    let per = mesh.nodes_per_cell() * nn;
    let mut buf = vec![0.0; per + nq * width];
    for (c, _) in mesh.cells_within(center, reach) {
        let (scratch, grads) = buf.split_at_mut(per);
        quad_gradients_into(mesh, field.target(), field.values(), c, scratch, grads);
        let w = mesh.cell_volume(c) / nq as f64;
        for q in 0..nq {
            let x = mesh.quad_point(c, q);
            f(&x, w, &grads[q * width..(q + 1) * width], c);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfBalance {
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Distinct cells met by the shell samples.
    pub cells: usize,
}

impl HopfBalance {
    /// `lhs <= (1 + slack) rhs`.
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= (1.0 + slack) * self.rhs
    }
}

/// Shell sample points with quadrature weights.
fn shell_samples(mesh: &DomainMesh, center: &[f64; 3], r: f64) -> Vec<([f64; 3], f64)> {
    let h = mesh.spacing();
    match mesh.kind() {
        MeshKind::Icosphere2 => {
            let frame = sphere_frame(center);
            let m = (16.0 * 2.0 * PI * r / h).ceil().max(64.0) as usize;
            let w = 2.0 * PI * sin(r) / m as f64;
            (0..m)
                .map(|i| {
                    let th = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                    (chart_point(mesh, center, &frame, &[r * cos(th), r * sin(th), 0.0]), w)
                })
                .collect()
        }
        MeshKind::Torus2 | MeshKind::Patch2 => {
            let m = (16.0 * 2.0 * PI * r / h).ceil().max(64.0) as usize;
            let w = 2.0 * PI * r / m as f64;
            (0..m)
                .map(|i| {
                    let th = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                    ([center[0] + r * cos(th), center[1] + r * sin(th), 0.0], w)
                })
                .collect()
        }
        MeshKind::Torus3 | MeshKind::Patch3 => {
            // Fibonacci lattice on the sphere of radius r.
            let m = (64.0 * 4.0 * PI * r * r / (h * h)).ceil().max(256.0) as usize;
            let w = 4.0 * PI * r * r / m as f64;
            let golden = PI * (3.0 - sqrt(5.0));
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let rho = sqrt(1.0 - z * z);
                    let th = golden * i as f64;
                    (
                        [
                            center[0] + r * rho * cos(th),
                            center[1] + r * rho * sin(th),
                            center[2] + r * z,
                        ],
                        w,
                    )
                })
                .collect()
        }
    }
}

/// Both sides of the Pohozaev-type balance on the shell `|x - center| = r`:
/// `lhs = oint w |d_r u|^2` and
/// `rhs = (p - n) / ((p - 1) r) int_{B_r} a^{p/n}
///      + 1/(p - 1) oint a^{(p-n)/n} [s + (delta + |grad u|^2)^{(n-2)/2} (delta + |grad_T u|^2)]`
/// with `a = s + (delta + |grad u|^2)^{n/2}` and `grad_T` the tangential part.
pub fn hopf_balance(field: &MapField, params: &GrowthParams, center: usize, r: f64) -> Result<HopfBalance> {
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let mesh = field.mesh();
    let nn = field.ambient_dim();
    let c0 = mesh.node(center);
    let n = params.nf();
    let p = params.p;
    let (s, delta) = (params.s, params.delta);
    let samples = shell_samples(mesh, &c0, r);
    let mut cells = Vec::with_capacity(samples.len());
    let mut lhs = 0.0;
    let mut shell = 0.0;
    for (x, w) in &samples {
        let Some(c) = mesh.locate(x) else {
            return Err(Error::UnderResolvedShell { radius: r, cells: 0 });
        };
        cells.push(c);
        let grad = field.point_gradient(x).unwrap_or_default();
        let (rad2, t) = radial_split(mesh, c, &c0, x, &grad, nn);
        let tan2 = t - rad2;
        let a = s + gpow(delta + t, 0.5 * n);
        lhs += w * weight(t, params) * rad2;
        shell += w * gpow(a, (p - n) / n) * (s + gpow(delta + t, 0.5 * n - 1.0) * (delta + tan2));
    }
    cells.sort_unstable();
    cells.dedup();
    if cells.len() < 16 {
        return Err(Error::UnderResolvedShell {
            radius: r,
            cells: cells.len(),
        });
    }
    let mut ball = 0.0;
    for_quad_points(field, &c0, r + mesh.spacing(), |x, w, g, _| {
        if mesh.point_distance(&c0, x) <= r {
            let t: f64 = g.iter().map(|v| v * v).sum();
            ball += w * gpow(s + gpow(delta + t, 0.5 * n), p / n);
        }
    });
    let rhs = (p - n) / ((p - 1.0) * r) * ball + shell / (p - 1.0);
    Ok(HopfBalance {
        radius: r,
        lhs,
        rhs,
        cells: cells.len(),
    })
}

/// `int_{A(2 R1, R2 / 4)} |grad_T u|^p`, the tangential energy of the neck.
pub fn tangential_neck_energy(field: &MapField, params: &GrowthParams, center: usize, r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 >= 8.0 * r1) {
        return Err(invalid("r2", "need r1 > 0 and r2 >= 8 r1"));
    }
    Ok(tangential_annulus(field, params, center, 2.0 * r1, 0.25 * r2))
}

/// `int_{A(lo, hi)} |grad_T u|^p` over quadrature points.
fn tangential_annulus(field: &MapField, params: &GrowthParams, center: usize, lo: f64, hi: f64) -> f64 {
    let mesh = field.mesh();
    let nn = field.ambient_dim();
    let c0 = mesh.node(center);
    let mut total = 0.0;
    for_quad_points(field, &c0, hi + mesh.spacing(), |x, w, g, c| {
        let d = mesh.point_distance(&c0, x);
        if d > lo && d <= hi {
            let (rad2, t) = radial_split(mesh, c, &c0, x, g, nn);
            total += w * gpow((t - rad2).max(0.0), 0.5 * params.p);
        }
    });
    total
}

/// `max dist(center, x_c) |grad u(x_c)|` over cells with centroid in
/// `A(r_in, r_out)`, using centroid gradients.
pub fn gradient_decay_check(field: &MapField, center: usize, r_in: f64, r_out: f64) -> f64 {
    let mesh = field.mesh();
    let c0 = mesh.node(center);
    mesh.cells_within(&c0, r_out)
        .iter()
        .filter(|(_, d)| *d > r_in)
        .map(|(c, d)| {
            let g = field.cell_gradient(*c);
            d * sqrt(g.iter().map(|v| v * v).sum())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Concentration level for `F(r_k)`; `None` uses `0.3 * 4 pi`.
    pub threshold: Option<f64>,
    /// Rescaled chart radius multiple.
    pub k: f64,
    /// Inner neck radius as a multiple of `r_k`.
    pub neck_inner: f64,
    pub neck_outer: f64,
    pub rescale_resolution: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            threshold: None,
            k: 8.0,
            neck_inner: 8.0,
            neck_outer: 0.25,
            rescale_resolution: 128,
        }
    }
}

impl ReportConfig {
    pub fn threshold_value(&self) -> f64 {
        self.threshold.unwrap_or(0.3 * 4.0 * PI)
    }

    /// A threshold crossing counts as a bubble when the rescaled chart ball
    /// `B_{k r}` fits inside the outer neck radius.
    pub fn detects(&self, c: &Concentration) -> bool {
        self.k * c.radius <= self.neck_outer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub node: usize,
    pub radius: f64,
    /// `D_n` of the rescaled map over its radius-`K` chart ball.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckRing {
    pub r_in: f64,
    pub r_out: f64,
    pub energy: f64,
    /// `int |grad_T u|^p` over the ring.
    pub tangential_energy: f64,
    /// Hopf balance on the outer shell; `None` when under-resolved.
    pub hopf: Option<HopfBalance>,
}

/// Concentration data of one continuation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConcentration {
    pub k: usize,
    pub p: f64,
    pub delta: f64,
    /// Threshold crossing of `F`, whether or not it counts as a bubble.
    pub concentration: Option<Concentration>,
    /// The crossing passes [`ReportConfig::detects`].
    pub detected: bool,
    pub radii_exponent: Option<f64>,
    /// `E_{p_k, delta_k}` over `A(neck_inner r_k, neck_outer)`.
    pub neck_energy: Option<f64>,
    /// `(p_k - n) * entropy_k`.
    pub entropy_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    pub steps: Vec<StepConcentration>,
    pub bubbles: Vec<Bubble>,
    /// `D_n` outside `B_{K r_k}(x_k)`; the whole `D_n` without concentration.
    pub base_energy: f64,
    /// Doubling annuli from `K r_k` to `neck_outer` with their `E_{p,delta}`.
    pub neck_ladder: Vec<NeckRing>,
    pub energy: f64,
    pub dirichlet: f64,
    pub identity_defect: f64,
    /// More than one disjoint ball reaches the threshold.
    pub multi_bubble: bool,
}

/// Concentration data per step from stored step fields.
pub fn step_concentrations(
    rows: &[TraceRow],
    fields: &[&MapField],
    base: &GrowthParams,
    config: &ReportConfig,
) -> Result<Vec<StepConcentration>> {
    let n = base.n;
    rows.iter()
        .zip(fields)
        .map(|(row, field)| {
            let params = base.with_p_delta(row.p, row.delta)?;
            let per_cell = total_energy(field, &params).per_cell;
            let conc = concentration_radius_from(field.mesh(), &per_cell, config.threshold_value())?;
            let detected = conc.is_some_and(|c| config.detects(&c));
            let neck = conc.filter(|_| detected).map(|c| {
                crate::energy::annulus_sum(
                    field.mesh(),
                    &per_cell,
                    &field.mesh().node(c.node),
                    config.neck_inner * c.radius,
                    config.neck_outer,
                )
            });
            Ok(StepConcentration {
                k: row.k,
                p: row.p,
                delta: row.delta,
                concentration: conc,
                detected,
                radii_exponent: conc.map(|c| radii_exponent(c.radius, n, row.p)),
                neck_energy: neck,
                entropy_product: (row.p - n as f64) * row.entropy,
            })
        })
        .collect()
}

/// The energy-identity report for a completed continuation run.
pub fn energy_identity_report(run: &ContinuationRun, base: &GrowthParams, config: &ReportConfig) -> Result<BubbleReport> {
    let fields: Vec<&MapField> = run.results.iter().map(|r| &r.field).collect();
    let steps = step_concentrations(&run.trace.rows, &fields, base, config)?;
    let Some(last) = run.results.last() else {
        return Ok(BubbleReport {
            steps,
            bubbles: Vec::new(),
            base_energy: 0.0,
            neck_ladder: Vec::new(),
            energy: 0.0,
            dirichlet: 0.0,
            identity_defect: 0.0,
            multi_bubble: false,
        });
    };
    let row = run.trace.rows.last().expect("one row per result");
    let params = base.with_p_delta(row.p, row.delta)?;
    final_report(&last.field, &params, steps, config)
}

/// Report for a single final field, with precomputed step data.
pub fn final_report(
    field: &MapField,
    params: &GrowthParams,
    steps: Vec<StepConcentration>,
    config: &ReportConfig,
) -> Result<BubbleReport> {
    let mesh = field.mesh();
    let energy_cells = total_energy(field, params).per_cell;
    let dn_cells = dirichlet_per_cell(field, params.n);
    let energy: f64 = energy_cells.iter().sum();
    let dirichlet: f64 = dn_cells.iter().sum();
    let threshold = config.threshold_value();
    let conc = concentration_radius_from(mesh, &energy_cells, threshold)?.filter(|c| config.detects(c));
    let Some(conc) = conc else {
        return Ok(BubbleReport {
            steps,
            bubbles: Vec::new(),
            base_energy: dirichlet,
            neck_ladder: Vec::new(),
            energy,
            dirichlet,
            identity_defect: (energy - dirichlet).abs(),
            multi_bubble: false,
        });
    };
    let x = mesh.node(conc.node);
    let reach = config.k * conc.radius;
    let rescaled = rescale_map(
        field,
        conc.node,
        conc.radius,
        params,
        &RescaleConfig {
            k: config.k,
            resolution: config.rescale_resolution,
        },
    )?;
    let chart = rescaled.field.mesh();
    let chart_dn = dirichlet_per_cell(&rescaled.field, params.n);
    let bubble_energy = crate::energy::ball_sum(chart, &chart_dn, &[0.0; 3], config.k);
    let inside = crate::energy::ball_sum(mesh, &dn_cells, &x, reach);
    let base_energy = dirichlet - inside;
    let mut neck_ladder = Vec::new();
    let mut r_in = reach;
    while r_in < config.neck_outer {
        let r_out = (2.0 * r_in).min(config.neck_outer);
        neck_ladder.push(NeckRing {
            r_in,
            r_out,
            energy: crate::energy::annulus_sum(mesh, &energy_cells, &x, r_in, r_out),
            tangential_energy: tangential_annulus(field, params, conc.node, r_in, r_out),
            hopf: hopf_balance(field, params, conc.node, r_out).ok(),
        });
        r_in = r_out;
    }
    let multi_bubble = second_concentration(mesh, &energy_cells, &x, reach, config);
    Ok(BubbleReport {
        steps,
        bubbles: vec![Bubble {
            node: conc.node,
            radius: conc.radius,
            energy: bubble_energy,
        }],
        base_energy,
        neck_ladder,
        energy,
        dirichlet,
        identity_defect: (energy - base_energy - bubble_energy).abs(),
        multi_bubble,
    })
}

/// Whether the energy outside `B_reach(x)` still forms a detected bubble.
fn second_concentration(mesh: &DomainMesh, per_cell: &[f64], x: &[f64; 3], reach: f64, config: &ReportConfig) -> bool {
    let mut outside = per_cell.to_vec();
    for (c, _) in mesh.cells_within(x, reach) {
        outside[c] = 0.0;
    }
    matches!(
        concentration_radius_from(mesh, &outside, config.threshold_value()),
        Ok(Some(c)) if config.detects(&c)
    )
}

/// `(p_k - n) * entropy_k` per trace row.
pub fn entropy_trace(rows: &[TraceRow], n: usize) -> Vec<f64> {
    rows.iter().map(|r| (r.p - n as f64) * r.entropy).collect()
}
