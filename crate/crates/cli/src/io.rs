//! JSON and CSV formats for meshes, fields, traces, annulus ladders and
//! Cordes tables, each with a matching reader.

use anyhow::{bail, Context, Result};
use nharm_core::bubbling::{HopfBalance, NeckRing};
use nharm_core::manifolds::{build_icosphere_mesh, build_patch_mesh, build_torus_mesh};
use nharm_core::solver::TraceRow;
use nharm_core::{DomainMesh, MapField, MeshKind, TargetManifold};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Version written to and required of every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Node positions must match the rebuilt mesh to this tolerance.
const GEOMETRY_TOL: f64 = 1e-12;

/// `{kind, resolution | subdivisions, nodes, cells}`; grid meshes also carry
/// `side` and `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshJson {
    pub kind: MeshKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdivisions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
    pub nodes: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
}

impl MeshJson {
    pub fn from_mesh(mesh: &DomainMesh) -> Self {
        let grid = mesh.kind().is_grid();
        MeshJson {
            kind: mesh.kind(),
            resolution: grid.then(|| mesh.resolution()),
            subdivisions: (!grid).then(|| mesh.resolution()),
            side: grid.then(|| mesh.side()),
            origin: grid.then(|| mesh.origin()),
            nodes: mesh.nodes().to_vec(),
            cells: mesh.cells().chunks(mesh.nodes_per_cell()).map(|c| c.to_vec()).collect(),
        }
    }

    /// Rebuilds the mesh from its parameters and checks the stored tables.
    pub fn to_mesh(&self) -> Result<DomainMesh> {
        let grid = |name: &str| -> Result<(usize, f64)> {
            let res = self.resolution.with_context(|| format!("mesh field `resolution` is required for {name}"))?;
            let side = self.side.with_context(|| format!("mesh field `side` is required for {name}"))?;
            Ok((res, side))
        };
        let mesh = match self.kind {
            MeshKind::Torus2 | MeshKind::Torus3 => {
                let (res, side) = grid("torus meshes")?;
                build_torus_mesh(self.kind.dim(), res, side)?
            }
            MeshKind::Patch2 | MeshKind::Patch3 => {
                let (res, side) = grid("patch meshes")?;
                let origin = self.origin.context("mesh field `origin` is required for patch meshes")?;
                let mut center = [0.0; 3];
                for k in 0..self.kind.dim() {
                    center[k] = origin[k] + 0.5 * side;
                }
                build_patch_mesh(self.kind.dim(), res, side, center)?
            }
            MeshKind::Icosphere2 => {
                let s = self.subdivisions.context("mesh field `subdivisions` is required for icosphere meshes")?;
                build_icosphere_mesh(s)?
            }
        };
        let flat: Vec<usize> = self.cells.iter().flatten().copied().collect();
        if self.cells.iter().any(|c| c.len() != mesh.nodes_per_cell()) {
            bail!("mesh field `cells`: every cell needs {} nodes", mesh.nodes_per_cell());
        }
        let scale = 1.0 + mesh.side().abs();
        mesh.check_geometry(&self.nodes, &flat, GEOMETRY_TOL * scale)
            .context("mesh fields `nodes`/`cells`")?;
        Ok(mesh)
    }
}

/// A stored map: mesh, target and flattened node values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldJson {
    pub schema_version: u32,
    pub mesh: MeshJson,
    pub target: TargetManifold,
    pub values: Vec<f64>,
}

impl FieldJson {
    pub fn from_field(field: &MapField) -> Self {
        FieldJson {
            schema_version: SCHEMA_VERSION,
            mesh: MeshJson::from_mesh(field.mesh()),
            target: field.target().clone(),
            values: field.values().to_vec(),
        }
    }

    pub fn to_field(&self) -> Result<MapField> {
        check_schema(self.schema_version)?;
        let mesh = Arc::new(self.mesh.to_mesh()?);
        MapField::new(mesh, self.target.clone(), self.values.clone()).context("field field `values`")
    }
}

pub fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("field `schema_version`: expected {SCHEMA_VERSION}, found {version}");
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut text = String::new();
    BufReader::new(file).read_to_string(&mut text)?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

pub fn write_field(path: &Path, field: &MapField) -> Result<()> {
    write_json(path, &FieldJson::from_field(field))
}

pub fn read_field(path: &Path) -> Result<MapField> {
    read_json::<FieldJson>(path)?.to_field()
}

pub fn write_mesh(path: &Path, mesh: &DomainMesh) -> Result<()> {
    write_json(path, &MeshJson::from_mesh(mesh))
}

pub fn read_mesh(path: &Path) -> Result<DomainMesh> {
    read_json::<MeshJson>(path)?.to_mesh()
}

/// 17 significant digits, `.` decimal point.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str, column: &str) -> Result<f64> {
    s.trim().parse().with_context(|| format!("column `{column}`: cannot parse `{s}`"))
}

fn parse_opt(s: &str, column: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, column).map(Some)
    }
}

fn csv_writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn csv_records<R: Read>(r: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        bail!("CSV header {found:?} does not match {header:?}");
    }
    rdr.records().map(|r| r.map_err(Into::into)).collect()
}

pub const TRACE_HEADER: [&str; 9] = ["k", "p", "delta", "E_pdelta", "D_n", "entropy", "residual", "iterations", "degree"];

/// The columns of a trace row that the CSV carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCsvRow {
    pub k: usize,
    pub p: f64,
    pub delta: f64,
    pub energy: f64,
    pub dirichlet: f64,
    pub entropy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub degree: Option<i64>,
}

impl From<&TraceRow> for TraceCsvRow {
    fn from(r: &TraceRow) -> Self {
        TraceCsvRow {
            k: r.k,
            p: r.p,
            delta: r.delta,
            energy: r.energy,
            dirichlet: r.dirichlet,
            entropy: r.entropy,
            residual: r.residual,
            iterations: r.iterations,
            degree: r.degree,
        }
    }
}

pub fn write_trace_csv<W: Write>(w: W, rows: &[TraceCsvRow]) -> Result<()> {
    let mut out = csv_writer(w, &TRACE_HEADER)?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            fmt_f64(r.p),
            fmt_f64(r.delta),
            fmt_f64(r.energy),
            fmt_f64(r.dirichlet),
            fmt_f64(r.entropy),
            fmt_f64(r.residual),
            r.iterations.to_string(),
            r.degree.map(|d| d.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceCsvRow>> {
    csv_records(r, &TRACE_HEADER)?
        .iter()
        .map(|rec| {
            let degree = rec[8].trim();
            Ok(TraceCsvRow {
                k: rec[0].trim().parse().context("column `k`")?,
                p: parse_f64(&rec[1], "p")?,
                delta: parse_f64(&rec[2], "delta")?,
                energy: parse_f64(&rec[3], "E_pdelta")?,
                dirichlet: parse_f64(&rec[4], "D_n")?,
                entropy: parse_f64(&rec[5], "entropy")?,
                residual: parse_f64(&rec[6], "residual")?,
                iterations: rec[7].trim().parse().context("column `iterations`")?,
                degree: if degree.is_empty() { None } else { Some(degree.parse().context("column `degree`")?) },
            })
        })
        .collect()
}

pub const LADDER_HEADER: [&str; 6] = ["r_in", "r_out", "neck_energy", "tangential_energy", "hopf_lhs", "hopf_rhs"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderCsvRow {
    pub r_in: f64,
    pub r_out: f64,
    pub neck_energy: f64,
    pub tangential_energy: f64,
    pub hopf_lhs: Option<f64>,
    pub hopf_rhs: Option<f64>,
}

impl From<&NeckRing> for LadderCsvRow {
    fn from(r: &NeckRing) -> Self {
        LadderCsvRow {
            r_in: r.r_in,
            r_out: r.r_out,
            neck_energy: r.energy,
            tangential_energy: r.tangential_energy,
            hopf_lhs: r.hopf.map(|h: HopfBalance| h.lhs),
            hopf_rhs: r.hopf.map(|h| h.rhs),
        }
    }
}

pub fn write_ladder_csv<W: Write>(w: W, rows: &[LadderCsvRow]) -> Result<()> {
    let mut out = csv_writer(w, &LADDER_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.r_in),
            fmt_f64(r.r_out),
            fmt_f64(r.neck_energy),
            fmt_f64(r.tangential_energy),
            fmt_opt(r.hopf_lhs),
            fmt_opt(r.hopf_rhs),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ladder_csv<R: Read>(r: R) -> Result<Vec<LadderCsvRow>> {
    csv_records(r, &LADDER_HEADER)?
        .iter()
        .map(|rec| {
            Ok(LadderCsvRow {
                r_in: parse_f64(&rec[0], "r_in")?,
                r_out: parse_f64(&rec[1], "r_out")?,
                neck_energy: parse_f64(&rec[2], "neck_energy")?,
                tangential_energy: parse_f64(&rec[3], "tangential_energy")?,
                hopf_lhs: parse_opt(&rec[4], "hopf_lhs")?,
                hopf_rhs: parse_opt(&rec[5], "hopf_rhs")?,
            })
        })
        .collect()
}

pub const CORDES_HEADER: [&str; 4] = ["p", "nN", "epsilon_max", "contraction_factor"];

/// `contraction_factor` is empty where `epsilon_max = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CordesRow {
    pub p: f64,
    pub nn: usize,
    pub epsilon_max: f64,
    pub contraction_factor: Option<f64>,
}

pub fn write_cordes_csv<W: Write>(w: W, rows: &[CordesRow]) -> Result<()> {
    let mut out = csv_writer(w, &CORDES_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.p),
            r.nn.to_string(),
            fmt_f64(r.epsilon_max),
            fmt_opt(r.contraction_factor),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cordes_csv<R: Read>(r: R) -> Result<Vec<CordesRow>> {
    csv_records(r, &CORDES_HEADER)?
        .iter()
        .map(|rec| {
            Ok(CordesRow {
                p: parse_f64(&rec[0], "p")?,
                nn: rec[1].trim().parse().context("column `nN`")?,
                epsilon_max: parse_f64(&rec[2], "epsilon_max")?,
                contraction_factor: parse_opt(&rec[3], "contraction_factor")?,
            })
        })
        .collect()
}
