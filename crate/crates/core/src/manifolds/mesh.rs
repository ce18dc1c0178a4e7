use crate::error::{invalid, Error, Result};
use crate::math::{acos, ceil, floor, sqrt};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Periodic square `[0, L)^2`, bilinear quads.
    Torus2,
    /// Periodic cube `[0, L)^3`, trilinear hexahedra.
    Torus3,
    /// Subdivided icosahedron on the unit sphere, linear triangles.
    Icosphere2,
    /// Non-periodic square chart, bilinear quads.
    Patch2,
    /// Non-periodic cube chart, trilinear hexahedra.
    Patch3,
}

impl MeshKind {
    pub fn dim(self) -> usize {
        match self {
            MeshKind::Torus2 | MeshKind::Icosphere2 | MeshKind::Patch2 => 2,
            MeshKind::Torus3 | MeshKind::Patch3 => 3,
        }
    }

    pub fn is_grid(self) -> bool {
        !matches!(self, MeshKind::Icosphere2)
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, MeshKind::Torus2 | MeshKind::Torus3)
    }
}

/// Discretised domain.
///
/// Grid meshes index nodes lexicographically (`x` fastest) and list cell
/// corners in bit order (`x` bit first). The centroid gradient of a node field
/// on cell `c` is `sum_a stencil(c)[a * dim + k] * u[cell_nodes(c)[a]]` for the
/// local direction `k`; on the icosphere the local directions are the
/// orthonormal in-plane basis returned by [`DomainMesh::frame`].
///
/// Energies integrate over [`DomainMesh::quad_count`] points per cell with
/// equal weights: tensor Gauss points on grids, the centroid on triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMesh {
    kind: MeshKind,
    resolution: usize,
    side: f64,
    origin: [f64; 3],
    nodes: Vec<[f64; 3]>,
    cells: Vec<usize>,
    per_cell: usize,
    volume: Vec<f64>,
    stencil: Vec<f64>,
    quad_count: usize,
    quad_local: Vec<f64>,
    quad_shape: Vec<f64>,
    quad_offset: Vec<[f64; 3]>,
    centroid: Vec<[f64; 3]>,
    frame: Vec<[[f64; 3]; 2]>,
    node_volume: Vec<f64>,
}

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn normalized(a: &[f64; 3]) -> [f64; 3] {
    let l = sqrt(dot3(a, a));
    [a[0] / l, a[1] / l, a[2] / l]
}

/// Uniform periodic grid on `[0, side)^n` with `resolution` cells per side.
pub fn build_torus_mesh(n: usize, resolution: usize, side: f64) -> Result<DomainMesh> {
    let kind = match n {
        2 => MeshKind::Torus2,
        3 => MeshKind::Torus3,
        _ => return Err(invalid("n", "torus meshes exist for n = 2 and n = 3")),
    };
    build_grid(kind, resolution, side, [0.0; 3])
}

/// Non-periodic grid on the cube of edge `side` centred at `center`, with
/// `resolution` cells per side.
pub fn build_patch_mesh(n: usize, resolution: usize, side: f64, center: [f64; 3]) -> Result<DomainMesh> {
    let kind = match n {
        2 => MeshKind::Patch2,
        3 => MeshKind::Patch3,
        _ => return Err(invalid("n", "patch meshes exist for n = 2 and n = 3")),
    };
    let mut origin = [0.0; 3];
    for k in 0..n {
        origin[k] = center[k] - 0.5 * side;
    }
    build_grid(kind, resolution, side, origin)
}

fn build_grid(kind: MeshKind, resolution: usize, side: f64, origin: [f64; 3]) -> Result<DomainMesh> {
    if resolution < 2 {
        return Err(invalid("resolution", "need at least 2 cells per side"));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(invalid("side", "must be positive and finite"));
    }
    let dim = kind.dim();
    let m = resolution;
    let periodic = kind.is_periodic();
    let npts = if periodic { m } else { m + 1 };
    let h = side / m as f64;
    let node_count = npts.pow(dim as u32);
    let cell_count = m.pow(dim as u32);
    let per_cell = 1usize << dim;

    let mut nodes = Vec::with_capacity(node_count);
    for idx in 0..node_count {
        let mut p = [0.0; 3];
        let mut rest = idx;
        for pk in p.iter_mut().take(dim) {
            *pk = (rest % npts) as f64 * h;
            rest /= npts;
        }
        for k in 0..dim {
            p[k] += origin[k];
        }
        nodes.push(p);
    }

    let node_index = |ijk: [usize; 3]| -> usize {
        let mut idx = 0;
        for k in (0..dim).rev() {
            let c = if periodic { ijk[k] % m } else { ijk[k] };
            idx = idx * npts + c;
        }
        idx
    };

    let mut cells = Vec::with_capacity(cell_count * per_cell);
    let mut centroid = Vec::with_capacity(cell_count);
    for c in 0..cell_count {
        let mut base = [0usize; 3];
        let mut rest = c;
        for bk in base.iter_mut().take(dim) {
            *bk = rest % m;
            rest /= m;
        }
        for a in 0..per_cell {
            let mut ijk = base;
            for (k, v) in ijk.iter_mut().enumerate().take(dim) {
                *v += (a >> k) & 1;
            }
            cells.push(node_index(ijk));
        }
        let mut ctr = [0.0; 3];
        for k in 0..dim {
            ctr[k] = origin[k] + (base[k] as f64 + 0.5) * h;
        }
        centroid.push(ctr);
    }

    // Gradient of the multilinear interpolant at local coordinates in [0,1]^n.
    let grad_at = |xi: [f64; 3]| -> Vec<f64> {
        let mut local = vec![0.0; per_cell * dim];
        for a in 0..per_cell {
            for k in 0..dim {
                let mut v = if (a >> k) & 1 == 1 { 1.0 / h } else { -1.0 / h };
                for m in 0..dim {
                    if m != k {
                        v *= if (a >> m) & 1 == 1 { xi[m] } else { 1.0 - xi[m] };
                    }
                }
                local[a * dim + k] = v;
            }
        }
        local
    };
    let local = grad_at([0.5; 3]);
    let mut stencil = Vec::with_capacity(cell_count * per_cell * dim);
    for _ in 0..cell_count {
        stencil.extend_from_slice(&local);
    }
    let g = 0.5 / sqrt(3.0);
    let quad_count = per_cell;
    let mut quad_local = Vec::with_capacity(quad_count * per_cell * dim);
    let mut quad_offset = Vec::with_capacity(quad_count);
    let mut quad_shape = Vec::with_capacity(quad_count * per_cell);
    for q in 0..quad_count {
        let mut xi = [0.5; 3];
        let mut off = [0.0; 3];
        for k in 0..dim {
            let sgn = if (q >> k) & 1 == 1 { 1.0 } else { -1.0 };
            xi[k] = 0.5 + sgn * g;
            off[k] = sgn * g * h;
        }
        quad_local.extend_from_slice(&grad_at(xi));
        quad_offset.push(off);
        for a in 0..per_cell {
            quad_shape.push(
                (0..dim)
                    .map(|k| if (a >> k) & 1 == 1 { xi[k] } else { 1.0 - xi[k] })
                    .product(),
            );
        }
    }

    let cell_vol = h.powi(dim as i32);
    let volume = vec![cell_vol; cell_count];
    let mut node_volume = vec![0.0; node_count];
    for c in 0..cell_count {
        for a in 0..per_cell {
            node_volume[cells[c * per_cell + a]] += cell_vol / per_cell as f64;
        }
    }

    Ok(DomainMesh {
        kind,
        resolution,
        side,
        origin,
        nodes,
        cells,
        per_cell,
        volume,
        stencil,
        quad_count,
        quad_local,
        quad_shape,
        quad_offset,
        centroid,
        frame: Vec::new(),
        node_volume,
    })
}

/// Geodesic triangulation of the unit sphere: an icosahedron refined
/// `subdivisions` times by edge midpoints pushed to the sphere.
pub fn build_icosphere_mesh(subdivisions: usize) -> Result<DomainMesh> {
    let t = 0.5 * (1.0 + sqrt(5.0));
    let raw: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut nodes: Vec<[f64; 3]> = raw.iter().map(normalized).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 3]>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (nodes[a], nodes[b]);
                nodes.push(normalized(&[pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]]));
                nodes.len() - 1
            })
        };
        for f in &faces {
            let ab = mid(f[0], f[1], &mut nodes);
            let bc = mid(f[1], f[2], &mut nodes);
            let ca = mid(f[2], f[0], &mut nodes);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let cell_count = faces.len();
    let mut cells = Vec::with_capacity(cell_count * 3);
    let mut volume = Vec::with_capacity(cell_count);
    let mut stencil = Vec::with_capacity(cell_count * 6);
    let mut centroid = Vec::with_capacity(cell_count);
    let mut frame = Vec::with_capacity(cell_count);
    let mut node_volume = vec![0.0; nodes.len()];
    for f in &faces {
        let (mut a, mut b, c) = (f[0], f[1], f[2]);
        let (pa, pb, pc) = (nodes[a], nodes[b], nodes[c]);
        let sum = [pa[0] + pb[0] + pc[0], pa[1] + pb[1] + pc[1], pa[2] + pb[2] + pc[2]];
        if dot3(&cross(&sub(&pb, &pa), &sub(&pc, &pa)), &sum) < 0.0 {
            core::mem::swap(&mut a, &mut b);
        }
        let (pa, pb, pc) = (nodes[a], nodes[b], nodes[c]);
        let eb = sub(&pb, &pa);
        let ec = sub(&pc, &pa);
        let normal = normalized(&cross(&eb, &ec));
        let e1 = normalized(&eb);
        let e2 = cross(&normal, &e1);
        let (xb, yb) = (dot3(&eb, &e1), dot3(&eb, &e2));
        let (xc, yc) = (dot3(&ec, &e1), dot3(&ec, &e2));
        let twice_area = xb * yc - xc * yb;
        let area = 0.5 * twice_area;
        // Gradients of the three hat functions in the (e1, e2) frame.
        let (xa, ya) = (0.0, 0.0);
        stencil.extend_from_slice(&[
            (yb - yc) / twice_area,
            (xc - xb) / twice_area,
            (yc - ya) / twice_area,
            (xa - xc) / twice_area,
            (ya - yb) / twice_area,
            (xb - xa) / twice_area,
        ]);
        cells.extend_from_slice(&[a, b, c]);
        volume.push(area);
        centroid.push([sum[0] / 3.0, sum[1] / 3.0, sum[2] / 3.0]);
        frame.push([e1, e2]);
        for v in [a, b, c] {
            node_volume[v] += area / 3.0;
        }
    }

    Ok(DomainMesh {
        kind: MeshKind::Icosphere2,
        resolution: subdivisions,
        side: 1.0,
        origin: [0.0; 3],
        nodes,
        cells,
        per_cell: 3,
        volume,
        stencil,
        quad_count: 1,
        quad_local: Vec::new(),
        quad_shape: vec![1.0 / 3.0; 3],
        quad_offset: vec![[0.0; 3]],
        centroid,
        frame,
        node_volume,
    })
}

impl DomainMesh {
    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Cells per side for grids, subdivision count for the icosphere.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Edge length of the grid box; 1 (the radius) on the icosphere.
    pub fn side(&self) -> f64 {
        self.side
    }

    /// Lower corner of a grid.
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.volume.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        &self.cells[c * self.per_cell..(c + 1) * self.per_cell]
    }

    /// Flat node-index table, `nodes_per_cell` entries per cell.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        self.volume[c]
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.volume
    }

    pub fn total_volume(&self) -> f64 {
        self.volume.iter().sum()
    }

    /// Lumped mass: each cell's volume shared equally among its nodes.
    pub fn node_volume(&self, i: usize) -> f64 {
        self.node_volume[i]
    }

    pub fn node_volumes(&self) -> &[f64] {
        &self.node_volume
    }

    pub fn centroid(&self, c: usize) -> [f64; 3] {
        self.centroid[c]
    }

    pub fn stencil(&self, c: usize) -> &[f64] {
        let w = self.per_cell * self.dim();
        &self.stencil[c * w..(c + 1) * w]
    }

    /// Quadrature points per cell; each carries weight `volume / quad_count`.
    pub fn quad_count(&self) -> usize {
        self.quad_count
    }

    /// Gradient stencil at quadrature point `q` of cell `c`, laid out like
    /// [`DomainMesh::stencil`].
    #[inline]
    pub fn quad_stencil(&self, c: usize, q: usize) -> &[f64] {
        if self.kind.is_grid() {
            let w = self.per_cell * self.dim();
            &self.quad_local[q * w..(q + 1) * w]
        } else {
            self.stencil(c)
        }
    }

    /// Shape function values at quadrature point `q`, one per cell node.
    #[inline]
    pub fn quad_shape(&self, q: usize) -> &[f64] {
        &self.quad_shape[q * self.per_cell..(q + 1) * self.per_cell]
    }

    /// Position of quadrature point `q` of cell `c`.
    pub fn quad_point(&self, c: usize, q: usize) -> [f64; 3] {
        let ctr = self.centroid[c];
        let off = self.quad_offset[q];
        [ctr[0] + off[0], ctr[1] + off[1], ctr[2] + off[2]]
    }

    /// Gradient stencil of the interpolant at the point `x` of cell `c`.
    pub fn point_stencil(&self, c: usize, x: &[f64; 3]) -> Vec<f64> {
        if !self.kind.is_grid() {
            return self.stencil(c).to_vec();
        }
        let dim = self.dim();
        let h = self.side / self.resolution as f64;
        let base = self.nodes[self.cells[c * self.per_cell]];
        let d = self.displacement(&base, x);
        let mut xi = [0.0; 3];
        for k in 0..dim {
            xi[k] = (d[k] / h).clamp(0.0, 1.0);
        }
        let mut local = vec![0.0; self.per_cell * dim];
        for a in 0..self.per_cell {
            for k in 0..dim {
                let mut v = if (a >> k) & 1 == 1 { 1.0 / h } else { -1.0 / h };
                for m in 0..dim {
                    if m != k {
                        v *= if (a >> m) & 1 == 1 { xi[m] } else { 1.0 - xi[m] };
                    }
                }
                local[a * dim + k] = v;
            }
        }
        local
    }

    /// Orthonormal local directions of cell `c` in ambient coordinates.
    pub fn frame(&self, c: usize) -> [[f64; 3]; 2] {
        if self.kind == MeshKind::Icosphere2 {
            self.frame[c]
        } else {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        }
    }

    /// Ambient vector `v` expressed in the local gradient directions of `c`.
    pub fn to_local(&self, c: usize, v: &[f64; 3]) -> [f64; 3] {
        if self.kind == MeshKind::Icosphere2 {
            let f = &self.frame[c];
            [dot3(&f[0], v), dot3(&f[1], v), 0.0]
        } else {
            *v
        }
    }

    /// Grid spacing; mean edge length on the icosphere.
    pub fn spacing(&self) -> f64 {
        if self.kind.is_grid() {
            self.side / self.resolution as f64
        } else {
            let mut total = 0.0;
            for c in 0..self.cell_count() {
                let nd = self.cell_nodes(c);
                for k in 0..3 {
                    let (a, b) = (self.nodes[nd[k]], self.nodes[nd[(k + 1) % 3]]);
                    total += sqrt(dot3(&sub(&a, &b), &sub(&a, &b)));
                }
            }
            total / (3 * self.cell_count()) as f64
        }
    }

    /// Largest possible distance between two points.
    pub fn diameter(&self) -> f64 {
        let d = self.dim() as f64;
        match self.kind {
            MeshKind::Torus2 | MeshKind::Torus3 => 0.5 * self.side * sqrt(d),
            MeshKind::Patch2 | MeshKind::Patch3 => self.side * sqrt(d),
            MeshKind::Icosphere2 => core::f64::consts::PI,
        }
    }

    /// Displacement from `a` to `b`: minimum image on tori, chord elsewhere.
    pub fn displacement(&self, a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
        let mut d = sub(b, a);
        if self.kind.is_periodic() {
            let l = self.side;
            for v in d.iter_mut().take(self.dim()) {
                *v -= l * floor(*v / l + 0.5);
            }
        }
        d
    }

    /// Geodesic distance between two points of the domain.
    pub fn point_distance(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        if self.kind == MeshKind::Icosphere2 {
            acos(dot3(&normalized(a), &normalized(b)))
        } else {
            let d = self.displacement(a, b);
            sqrt(dot3(&d, &d))
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point_distance(&self.nodes[i], &self.nodes[j])
    }

    /// Unit radial direction at `x` pointing away from `center`, in ambient
    /// coordinates; `None` at the centre itself.
    pub fn radial_direction(&self, center: &[f64; 3], x: &[f64; 3]) -> Option<[f64; 3]> {
        let r = if self.kind == MeshKind::Icosphere2 {
            let (c, xh) = (normalized(center), normalized(x));
            let cx = dot3(&c, &xh);
            [cx * xh[0] - c[0], cx * xh[1] - c[1], cx * xh[2] - c[2]]
        } else {
            self.displacement(center, x)
        };
        let l = sqrt(dot3(&r, &r));
        if l <= 1e-14 {
            None
        } else {
            Some([r[0] / l, r[1] / l, r[2] / l])
        }
    }

    /// Cells whose centroid lies within `radius` of `center`, with distances,
    /// in increasing cell order.
    pub fn cells_within(&self, center: &[f64; 3], radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if let Some(range) = self.grid_box(center, radius, true) {
            for c in range {
                let d = self.point_distance(center, &self.centroid[c]);
                if d <= radius {
                    out.push((c, d));
                }
            }
            out.sort_unstable_by_key(|e| e.0);
        } else {
            for c in 0..self.cell_count() {
                let d = self.point_distance(center, &self.centroid[c]);
                if d <= radius {
                    out.push((c, d));
                }
            }
        }
        out
    }

    /// Nodes within `radius` of `center`, in increasing order.
    pub fn nodes_within(&self, center: &[f64; 3], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(range) = self.grid_box(center, radius, false) {
            for i in range {
                if self.point_distance(center, &self.nodes[i]) <= radius {
                    out.push(i);
                }
            }
            out.sort_unstable();
        } else {
            for i in 0..self.node_count() {
                if self.point_distance(center, &self.nodes[i]) <= radius {
                    out.push(i);
                }
            }
        }
        out
    }

    /// Candidate cells (or nodes) in the index box around `center`, each
    /// listed once. `None` when the box would wrap onto itself.
    fn grid_box(&self, center: &[f64; 3], radius: f64, cells: bool) -> Option<Vec<usize>> {
        if !self.kind.is_grid() {
            return None;
        }
        let dim = self.dim();
        let m = self.resolution;
        let h = self.side / m as f64;
        let periodic = self.kind.is_periodic();
        let count = if cells || periodic { m } else { m + 1 };
        let span = ceil(radius / h) as i64 + 1;
        if periodic && (2 * span + 1) as usize >= m {
            return None;
        }
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..dim {
            let u = (center[k] - self.origin[k]) / h - if cells { 0.5 } else { 0.0 };
            let mid = floor(u + 0.5) as i64;
            lo[k] = mid - span;
            hi[k] = mid + span;
            if !periodic {
                lo[k] = lo[k].max(0);
                hi[k] = hi[k].min(count as i64 - 1);
                if lo[k] > hi[k] {
                    return Some(Vec::new());
                }
            }
        }
        let mut out = Vec::new();
        let mut idx = lo;
        loop {
            let mut flat = 0usize;
            for k in (0..dim).rev() {
                let v = idx[k].rem_euclid(count as i64) as usize;
                flat = flat * count + v;
            }
            out.push(flat);
            let mut k = 0;
            loop {
                if k == dim {
                    return Some(out);
                }
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }

    /// Cell containing the point `x`; `None` outside a patch.
    pub fn locate(&self, x: &[f64; 3]) -> Option<usize> {
        if self.kind.is_grid() {
            let dim = self.dim();
            let m = self.resolution;
            let h = self.side / m as f64;
            let mut flat = 0usize;
            for k in (0..dim).rev() {
                let u = (x[k] - self.origin[k]) / h;
                let mut i = floor(u) as i64;
                if self.kind.is_periodic() {
                    i = i.rem_euclid(m as i64);
                } else {
                    if u < -1e-12 || u > m as f64 + 1e-12 {
                        return None;
                    }
                    i = i.clamp(0, m as i64 - 1);
                }
                flat = flat * m + i as usize;
            }
            Some(flat)
        } else {
            let xh = normalized(x);
            let mut best = None;
            let mut best_score = f64::NEG_INFINITY;
            for c in 0..self.cell_count() {
                let nd = self.cell_nodes(c);
                let (a, b, cc) = (self.nodes[nd[0]], self.nodes[nd[1]], self.nodes[nd[2]]);
                let s = dot3(&cross(&a, &b), &xh)
                    .min(dot3(&cross(&b, &cc), &xh))
                    .min(dot3(&cross(&cc, &a), &xh));
                if s > best_score {
                    best_score = s;
                    best = Some(c);
                }
            }
            best
        }
    }

    /// Interpolation weights of `x` within cell `c`, one per cell node.
    pub fn interpolation_weights(&self, c: usize, x: &[f64; 3]) -> Vec<f64> {
        if self.kind.is_grid() {
            let dim = self.dim();
            let h = self.side / self.resolution as f64;
            let base = self.nodes[self.cells[c * self.per_cell]];
            let d = self.displacement(&base, x);
            let mut t = [0.0; 3];
            for k in 0..dim {
                t[k] = (d[k] / h).clamp(0.0, 1.0);
            }
            (0..self.per_cell)
                .map(|a| {
                    (0..dim)
                        .map(|k| if (a >> k) & 1 == 1 { t[k] } else { 1.0 - t[k] })
                        .product()
                })
                .collect()
        } else {
            let nd = self.cell_nodes(c);
            let (a, b, cc) = (self.nodes[nd[0]], self.nodes[nd[1]], self.nodes[nd[2]]);
            let xh = normalized(x);
            let wa = dot3(&cross(&b, &cc), &xh).max(0.0);
            let wb = dot3(&cross(&cc, &a), &xh).max(0.0);
            let wc = dot3(&cross(&a, &b), &xh).max(0.0);
            let s = wa + wb + wc;
            vec![wa / s, wb / s, wc / s]
        }
    }

    /// Checks that `nodes` and `cells` describe this mesh, to `tol` per coordinate.
    pub fn check_geometry(&self, nodes: &[[f64; 3]], cells: &[usize], tol: f64) -> Result<()> {
        if nodes.len() != self.nodes.len() || cells != self.cells.as_slice() {
            return Err(Error::Shape(alloc::string::String::from(
                "node or cell table does not match the declared mesh",
            )));
        }
        for (a, b) in nodes.iter().zip(&self.nodes) {
            for k in 0..3 {
                if (a[k] - b[k]).abs() > tol {
                    return Err(Error::Shape(alloc::string::String::from(
                        "node coordinates do not match the declared mesh",
                    )));
                }
            }
        }
        Ok(())
    }
}
