//! Projected gradient descent on the discrete energies and the continuation
//! driver `p_k -> n`, `delta_k -> 0`.

use crate::energy::{
    dirichlet_energy, energy_change, entropy, gradient_values, per_cell_density, point_sq_norms, project_gradient,
};
use crate::error::{invalid, Error, Result};
use crate::kernel::{integrand_sq, GrowthParams};
use crate::manifolds::{degree, DomainMesh, MapField, MeshKind, TargetManifold};
use crate::math::{dot, gpow, norm_sq, sqrt};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the EL residual (see [`el_residual_norm`]) is at most this.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// First trial step; later trials start from a Barzilai-Borwein estimate.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            grad_tol: 1e-4,
            armijo_c: 1e-4,
            backtrack: 0.5,
            initial_step: 1e-3,
            min_step: 1e-14,
            max_step: 1e3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be positive"));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("max_step", self.max_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid("armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack", "must lie in (0, 1)"));
        }
        if self.min_step > self.max_step {
            return Err(invalid("min_step", "must not exceed max_step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    DegreeJump,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: MapField,
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
    /// Energy after each accepted step, starting with the initial energy.
    /// Entries after the first accumulate the per-cell decrements.
    pub energy_trace: Vec<f64>,
    /// Degree after each accepted step (sphere targets of matching dimension).
    pub degree_trace: Vec<i64>,
    pub status: SolveStatus,
    /// Set when the line search fell below `min_step`.
    pub diagnostic: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum DegreeMode {
    Off,
    Record,
    Enforce,
}

fn degree_applicable(field: &MapField) -> bool {
    matches!(field.target(), TargetManifold::Sphere { dim, .. } if *dim == field.mesh().dim())
}

/// `max_i |P g_i| / m_i` over nodes, with `m_i` the lumped node volume.
pub fn el_residual_norm(field: &MapField, params: &GrowthParams) -> f64 {
    let mut g = gradient_values(field.mesh(), field.target(), field.values(), params);
    project_gradient(field.target(), field.values(), &mut g);
    residual_of(field.mesh(), field.ambient_dim(), &g, None)
}

fn residual_of(mesh: &DomainMesh, nn: usize, g: &[f64], fixed: Option<&[bool]>) -> f64 {
    let mut r: f64 = 0.0;
    for (i, gi) in g.chunks(nn).enumerate() {
        if fixed.is_some_and(|f| f[i]) {
            continue;
        }
        r = r.max(sqrt(norm_sq(gi)) / mesh.node_volume(i));
    }
    r
}

/// Minimises the energy from `field0` by projected descent.
pub fn minimize(field0: &MapField, params: &GrowthParams, config: &SolverConfig) -> Result<SolveResult> {
    let mode = if degree_applicable(field0) { DegreeMode::Record } else { DegreeMode::Off };
    descend(field0, params, config, None, mode)
}

/// Minimisation with the values of `fixed_nodes` held fixed.
pub fn solve_dirichlet(
    field0: &MapField,
    fixed_nodes: &[usize],
    params: &GrowthParams,
    config: &SolverConfig,
) -> Result<SolveResult> {
    if fixed_nodes.is_empty() {
        return Err(invalid("fixed_nodes", "must not be empty"));
    }
    let mut fixed = vec![false; field0.mesh().node_count()];
    for &i in fixed_nodes {
        if i >= fixed.len() {
            return Err(invalid("fixed_nodes", "node index out of range"));
        }
        fixed[i] = true;
    }
    let mode = if degree_applicable(field0) { DegreeMode::Record } else { DegreeMode::Off };
    descend(field0, params, config, Some(&fixed), mode)
}

/// Minimisation started from the canonical degree-`d` map, aborting with
/// [`SolveStatus::DegreeJump`] if the degree ever changes.
pub fn minimize_in_degree_class(
    d: i64,
    mesh: Arc<DomainMesh>,
    target: &TargetManifold,
    params: &GrowthParams,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let field0 = degree_map(mesh, target, d, DEFAULT_BUBBLE_SCALE)?;
    descend(&field0, params, config, None, DegreeMode::Enforce)
}

/// Like [`minimize`] but aborting on a degree change.
pub fn minimize_degree_locked(field0: &MapField, params: &GrowthParams, config: &SolverConfig) -> Result<SolveResult> {
    if !degree_applicable(field0) {
        return Err(Error::DegreeUnsupported);
    }
    descend(field0, params, config, None, DegreeMode::Enforce)
}

fn checked_degree(values: &[f64], field0: &MapField) -> Option<i64> {
    let f = MapField::from_parts_unchecked(field0.mesh_arc().clone(), field0.target().clone(), values.to_vec());
    degree(&f).ok().map(|d| d.degree)
}

fn descend(
    field0: &MapField,
    params: &GrowthParams,
    config: &SolverConfig,
    fixed: Option<&[bool]>,
    mode: DegreeMode,
) -> Result<SolveResult> {
    config.validate()?;
    params.validate()?;
    let mesh = field0.mesh();
    let target = field0.target();
    if params.n != mesh.dim() || params.target_dim != target.ambient_dim() {
        return Err(invalid("params", "dimensions do not match the field"));
    }
    let nn = target.ambient_dim();
    let mass = mesh.node_volumes();

    let mut values = field0.values().to_vec();
    let energy_of = |v: &[f64]| -> f64 {
        per_cell_density(mesh, target, v, |t| integrand_sq(t, params)).iter().sum()
    };
    let grad_of = |v: &[f64]| -> Vec<f64> {
        let mut g = gradient_values(mesh, target, v, params);
        project_gradient(target, v, &mut g);
        if let Some(f) = fixed {
            for (i, gi) in g.chunks_mut(nn).enumerate() {
                if f[i] {
                    gi.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
        g
    };

    let mut energy = energy_of(&values);
    let mut g = grad_of(&values);
    let mut residual = residual_of(mesh, nn, &g, fixed);
    let mut energy_trace = vec![energy];
    let mut degree_trace = Vec::new();
    let initial_degree = if mode != DegreeMode::Off { checked_degree(&values, field0) } else { None };
    if let Some(d) = initial_degree {
        degree_trace.push(d);
    }

    let mut status = SolveStatus::MaxIters;
    let mut diagnostic = None;
    let mut iterations = 0;
    let mut step = config.initial_step;
    let mut last_move: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut point_t = point_sq_norms(mesh, target, &values);
    let mut trial_t = Vec::new();
    let mut trial = vec![0.0; values.len()];
    let mut disp = vec![0.0; values.len()];
    let mut dir = vec![0.0; values.len()];

    loop {
        if residual <= config.grad_tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        for (i, (di, gi)) in dir.chunks_mut(nn).zip(g.chunks(nn)).enumerate() {
            for k in 0..nn {
                di[k] = -gi[k] / mass[i];
            }
        }
        // Decrease predicted by the mass-weighted steepest direction.
        let slope: f64 = dir
            .chunks(nn)
            .zip(mass)
            .map(|(d, m)| m * norm_sq(d))
            .sum();

        if let Some((s, y)) = &last_move {
            let sms: f64 = s.chunks(nn).zip(mass).map(|(si, m)| m * norm_sq(si)).sum();
            let sy = dot(s, y);
            step = if sy > 0.0 { sms / sy } else { 2.0 * step };
        }
        step = step.clamp(config.min_step, config.max_step);

        let mut accepted = None;
        while step >= config.min_step {
            for (k, t) in trial.iter_mut().enumerate() {
                *t = values[k] + step * dir[k];
            }
            let mut ok = true;
            for (i, t) in trial.chunks_mut(nn).enumerate() {
                if fixed.is_some_and(|f| f[i]) {
                    t.copy_from_slice(&values[i * nn..(i + 1) * nn]);
                } else if target.project_in_place(t).is_err() {
                    ok = false;
                    break;
                }
            }
            if ok {
                for i in 0..mesh.node_count() {
                    target.difference(
                        &values[i * nn..(i + 1) * nn],
                        &trial[i * nn..(i + 1) * nn],
                        &mut disp[i * nn..(i + 1) * nn],
                    );
                }
                trial_t = point_sq_norms(mesh, target, &trial);
                let change = energy_change(mesh, params, &point_t, &trial_t);
                if change < 0.0 && change <= -config.armijo_c * step * slope {
                    accepted = Some(change);
                    break;
                }
            }
            step *= config.backtrack;
        }
        let Some(change) = accepted else {
            diagnostic = Some(alloc::format!(
                "line search fell below min_step {:e} at iteration {} (residual {:e})",
                config.min_step, iterations, residual
            ));
            break;
        };

        iterations += 1;
        core::mem::swap(&mut values, &mut trial);
        energy += change;
        energy_trace.push(energy);
        let g_new = grad_of(&values);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        last_move = Some((disp.clone(), y));
        g = g_new;
        residual = residual_of(mesh, nn, &g, fixed);
        core::mem::swap(&mut point_t, &mut trial_t);

        if mode != DegreeMode::Off {
            let d = checked_degree(&values, field0);
            if let Some(d) = d {
                degree_trace.push(d);
            }
            if mode == DegreeMode::Enforce && d != initial_degree {
                status = SolveStatus::DegreeJump;
                diagnostic = Some(alloc::format!(
                    "degree changed from {:?} to {:?} at iteration {}",
                    initial_degree, d, iterations
                ));
                break;
            }
        }
    }

    let field = MapField::from_parts_unchecked(field0.mesh_arc().clone(), target.clone(), values);
    let final_energy = energy_of(field.values());
    Ok(SolveResult {
        field,
        iterations,
        energy: final_energy,
        residual,
        energy_trace,
        degree_trace,
        status,
        diagnostic,
    })
}

/// Default bubble scale of [`degree_map`] on grid domains, relative to the side.
pub const DEFAULT_BUBBLE_SCALE: f64 = 0.2;

/// Cut-off radius of [`degree_map`] on grid domains, relative to the side.
pub const BUBBLE_CUTOFF: f64 = 0.45;

/// Inverse stereographic projection from the north pole, `R^k -> S^k`.
fn inverse_stereo(w: &[f64]) -> Vec<f64> {
    let q = norm_sq(w);
    let mut out: Vec<f64> = w.iter().map(|v| 2.0 * v / (q + 1.0)).collect();
    out.push((q - 1.0) / (q + 1.0));
    out
}

/// `z^d` (or `conj(z)^{|d|}` for negative `d`) for `z = (re, im)`.
fn complex_power(re: f64, im: f64, d: i64) -> (f64, f64) {
    let (mut ar, mut ai) = (1.0, 0.0);
    let im = if d < 0 { -im } else { im };
    for _ in 0..d.unsigned_abs() {
        let t = ar * re - ai * im;
        ai = ar * im + ai * re;
        ar = t;
    }
    (ar, ai)
}

/// Canonical degree-`d` map into the unit sphere.
///
/// On the icosphere this is `z -> z^d` in stereographic coordinates. On grid
/// domains it is a bubble of scale `scale * side` centred in the box,
/// `w = ((x - c)/lambda) / (1 - (|x - c|/R)^2)` raised to the `d`-th power and
/// mapped back, constant (the north pole) outside the cut-off radius
/// `R = 0.45 side`. Three-dimensional domains support `|d| <= 1`.
pub fn degree_map(mesh: Arc<DomainMesh>, target: &TargetManifold, d: i64, scale: f64) -> Result<MapField> {
    let n = mesh.dim();
    match target {
        TargetManifold::Sphere { dim, radius } if *dim == n && *radius == 1.0 => {}
        _ => return Err(invalid("target", "degree maps need the unit n-sphere")),
    }
    if !(scale > 0.0) {
        return Err(invalid("scale", "must be positive"));
    }
    let north = {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        v
    };
    if d == 0 {
        return MapField::constant(mesh, target.clone(), &north);
    }
    if n == 3 && d.abs() > 1 {
        return Err(invalid("d", "three-dimensional degree maps support |d| <= 1"));
    }
    let kind = mesh.kind();
    let side = mesh.side();
    let origin = mesh.origin();
    let target = target.clone();
    if kind == MeshKind::Icosphere2 {
        return MapField::from_fn(mesh, target, |x| {
            let denom = 1.0 - x[2];
            if denom <= 1e-15 {
                return north.clone();
            }
            let (re, im) = complex_power(x[0] / denom, x[1] / denom, d);
            inverse_stereo(&[re, im])
        });
    }
    let lambda = scale * side;
    let cutoff = BUBBLE_CUTOFF * side;
    let mut center = [0.0; 3];
    for k in 0..n {
        center[k] = origin[k] + 0.5 * side;
    }
    MapField::from_fn(mesh, target, move |x| {
        let mut z = [0.0; 3];
        for k in 0..n {
            z[k] = x[k] - center[k];
        }
        let rho2 = norm_sq(&z[..n]);
        if rho2 >= cutoff * cutoff {
            return north.clone();
        }
        let f = 1.0 / (lambda * (1.0 - rho2 / (cutoff * cutoff)));
        if n == 2 {
            // Inverse stereographic projection reverses the orientation of
            // the flat chart, hence the conjugate power.
            let (re, im) = complex_power(z[0] * f, z[1] * f, -d);
            inverse_stereo(&[re, im])
        } else {
            let sign = if d < 0 { -1.0 } else { 1.0 };
            inverse_stereo(&[sign * z[0] * f, z[1] * f, z[2] * f])
        }
    })
}

/// Strictly decreasing exponent and regularisation sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub p_list: Vec<f64>,
    pub delta_list: Vec<f64>,
}

impl ContinuationSchedule {
    pub fn new(p_list: Vec<f64>, delta_list: Vec<f64>) -> Result<Self> {
        let s = ContinuationSchedule { p_list, delta_list };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_list.is_empty() || self.p_list.len() != self.delta_list.len() {
            return Err(invalid("schedule", "p_list and delta_list must be non-empty and of equal length"));
        }
        for w in self.p_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(invalid("p_list", "must be strictly decreasing"));
            }
        }
        for w in self.delta_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(invalid("delta_list", "must be strictly decreasing"));
            }
        }
        if self.delta_list.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(invalid("delta_list", "entries must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Checks `p_list` against `(n, n + 1]`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        let nf = n as f64;
        if self.p_list.iter().any(|p| !(*p > nf && *p <= nf + 1.0)) {
            return Err(invalid("p_list", "entries must lie in (n, n + 1]"));
        }
        Ok(())
    }

    /// `p_k = n + (p0 - n) 2^{-k}`, `delta_k = delta0 2^{-k}` for `k < steps`.
    pub fn geometric(n: usize, p0: f64, delta0: f64, steps: usize) -> Result<Self> {
        let nf = n as f64;
        let p_list = (0..steps).map(|k| nf + (p0 - nf) * gpow(0.5, k as f64)).collect();
        let delta_list = (0..steps).map(|k| delta0 * gpow(0.5, k as f64)).collect();
        ContinuationSchedule::new(p_list, delta_list)
    }

    /// Geometric interpolation of `p - n` and `delta` between given end points.
    pub fn geometric_between(
        n: usize,
        p_first: f64,
        p_last: f64,
        delta_first: f64,
        delta_last: f64,
        steps: usize,
    ) -> Result<Self> {
        if steps < 2 {
            return ContinuationSchedule::new(vec![p_first], vec![delta_first]);
        }
        let nf = n as f64;
        let (a, b) = (p_first - nf, p_last - nf);
        if !(a > 0.0 && b > 0.0 && delta_first > 0.0 && delta_last > 0.0) {
            return Err(invalid("schedule", "end points must satisfy p > n and delta > 0"));
        }
        let frac = |k: usize| k as f64 / (steps - 1) as f64;
        let p_list = (0..steps).map(|k| nf + a * gpow(b / a, frac(k))).collect();
        let delta_list = (0..steps)
            .map(|k| delta_first * gpow(delta_last / delta_first, frac(k)))
            .collect();
        ContinuationSchedule::new(p_list, delta_list)
    }

    pub fn len(&self) -> usize {
        self.p_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_list.is_empty()
    }
}

/// One row per continuation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub p: f64,
    pub delta: f64,
    /// Converged `E_{p_k, delta_k}`.
    pub energy: f64,
    /// `D_n` of the converged field.
    pub dirichlet: f64,
    pub entropy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub degree: Option<i64>,
    pub status: SolveStatus,
    /// `E_{p_k, delta_k}` of the warm start, before re-minimisation.
    pub warm_start_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceTable {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct ContinuationRun {
    pub results: Vec<SolveResult>,
    pub trace: TraceTable,
    /// Step index at which a degree jump stopped the run.
    pub degree_jump_at: Option<usize>,
}

/// Minimises at each `(p_k, delta_k)` warm-started from the previous step.
/// Degree-carrying runs stop at the first degree jump; steps that hit
/// `max_iters` are flagged in the trace and the run continues.
pub fn run_continuation(
    field0: &MapField,
    base: &GrowthParams,
    schedule: &ContinuationSchedule,
    config: &SolverConfig,
) -> Result<ContinuationRun> {
    schedule.validate()?;
    let mut results: Vec<SolveResult> = Vec::with_capacity(schedule.len());
    let mut rows = Vec::with_capacity(schedule.len());
    let mut current = field0.clone();
    let locked = degree_applicable(field0) && degree(field0).is_ok();
    let mut degree_jump_at = None;
    for k in 0..schedule.len() {
        let params = base.with_p_delta(schedule.p_list[k], schedule.delta_list[k])?;
        let warm_start_energy = per_cell_density(current.mesh(), current.target(), current.values(), |t| {
            integrand_sq(t, &params)
        })
        .iter()
        .sum();
        let res = if locked {
            descend(&current, &params, config, None, DegreeMode::Enforce)?
        } else {
            minimize(&current, &params, config)?
        };
        rows.push(TraceRow {
            k,
            p: params.p,
            delta: params.delta,
            energy: res.energy,
            dirichlet: dirichlet_energy(&res.field, params.n),
            entropy: entropy(&res.field, &params),
            residual: res.residual,
            iterations: res.iterations,
            degree: res.degree_trace.last().copied(),
            status: res.status,
            warm_start_energy,
        });
        current = res.field.clone();
        let jumped = res.status == SolveStatus::DegreeJump;
        results.push(res);
        if jumped {
            degree_jump_at = Some(k);
            break;
        }
    }
    Ok(ContinuationRun {
        results,
        trace: TraceTable { rows },
        degree_jump_at,
    })
}
