//! Run configuration: a versioned JSON document resolved into meshes,
//! fields, parameters and schedules.

use crate::io::{check_schema, read_field, read_mesh};
use anyhow::{bail, Context, Result};
use nharm_core::bubbling::ReportConfig;
use nharm_core::manifolds::{build_icosphere_mesh, build_patch_mesh, build_torus_mesh};
use nharm_core::solver::{degree_map, ContinuationSchedule, SolverConfig, DEFAULT_BUBBLE_SCALE};
use nharm_core::{DomainMesh, GrowthParams, MapField, MeshKind, TargetManifold};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn default_side() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Torus2 {
        resolution: usize,
        #[serde(default = "default_side")]
        side: f64,
    },
    Torus3 {
        resolution: usize,
        #[serde(default = "default_side")]
        side: f64,
    },
    Icosphere2 {
        subdivisions: usize,
    },
    Patch2 {
        resolution: usize,
        #[serde(default = "default_side")]
        side: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Patch3 {
        resolution: usize,
        #[serde(default = "default_side")]
        side: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// A mesh JSON file, relative paths taken from the config directory.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMap {
    Constant {
        value: Vec<f64>,
    },
    /// The inclusion of the unit sphere into itself.
    Identity,
    Degree {
        degree: i64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// A field JSON file on the configured mesh.
    File {
        path: PathBuf,
    },
}

fn default_scale() -> f64 {
    DEFAULT_BUBBLE_SCALE
}

/// Initial exponent and regularisation; `s` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub p: f64,
    pub delta: f64,
    #[serde(default = "default_s")]
    pub s: f64,
}

fn default_s() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Halves `p - n` and `delta` per step, starting from `params`.
    Geometric { steps: usize },
    /// Geometric interpolation from `params` to the given end point.
    GeometricBetween { p_last: f64, delta_last: f64, steps: usize },
    Explicit { p_list: Vec<f64>, delta_list: Vec<f64> },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default = "default_true")]
    pub bubble_report: bool,
    #[serde(default)]
    pub report: ReportConfig,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            bubble_report: true,
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mesh: MeshSpec,
    pub target: TargetManifold,
    pub initial: InitialMap,
    pub params: ParamSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration with every input built.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub initial: MapField,
    pub params: GrowthParams,
    pub schedule: ContinuationSchedule,
    pub solver: SolverConfig,
    pub diagnostics: Diagnostics,
    pub output_dir: Option<PathBuf>,
}

fn field_err<T>(r: nharm_core::Result<T>, field: &str) -> Result<T> {
    r.with_context(|| format!("config field `{field}`"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("config schema violation")?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes relative file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MeshSpec::File { path } = &mut self.mesh {
            fix(path);
        }
        if let InitialMap::File { path } = &mut self.initial {
            fix(path);
        }
        if let Some(p) = &mut self.output_dir {
            fix(p);
        }
    }

    pub fn build_mesh(&self) -> Result<DomainMesh> {
        let mesh = match &self.mesh {
            MeshSpec::Torus2 { resolution, side } => build_torus_mesh(2, *resolution, *side),
            MeshSpec::Torus3 { resolution, side } => build_torus_mesh(3, *resolution, *side),
            MeshSpec::Icosphere2 { subdivisions } => build_icosphere_mesh(*subdivisions),
            MeshSpec::Patch2 { resolution, side, center } => build_patch_mesh(2, *resolution, *side, *center),
            MeshSpec::Patch3 { resolution, side, center } => build_patch_mesh(3, *resolution, *side, *center),
            MeshSpec::File { path } => {
                if !path.exists() {
                    bail!("config field `mesh.path`: mesh file {} does not exist", path.display());
                }
                return read_mesh(path).context("config field `mesh.path`");
            }
        };
        field_err(mesh, "mesh")
    }

    pub fn build_params(&self, n: usize) -> Result<GrowthParams> {
        field_err(self.target.validate(), "target")?;
        let target_dim = self.target.ambient_dim();
        field_err(GrowthParams::new(n, target_dim, self.params.p, self.params.delta, self.params.s), "params")
    }

    pub fn build_schedule(&self, params: &GrowthParams) -> Result<ContinuationSchedule> {
        let n = params.n;
        let sched = match &self.schedule {
            ScheduleSpec::Geometric { steps } => ContinuationSchedule::geometric(n, params.p, params.delta, *steps),
            ScheduleSpec::GeometricBetween { p_last, delta_last, steps } => {
                ContinuationSchedule::geometric_between(n, params.p, *p_last, params.delta, *delta_last, *steps)
            }
            ScheduleSpec::Explicit { p_list, delta_list } => {
                ContinuationSchedule::new(p_list.clone(), delta_list.clone())
            }
        };
        let sched = field_err(sched, "schedule")?;
        field_err(sched.validate_for(n), "schedule")?;
        if sched.p_list[0] > params.p || sched.delta_list[0] > params.delta {
            bail!("config field `schedule`: first step exceeds the initial `params`");
        }
        Ok(sched)
    }

    pub fn build_initial(&self, mesh: Arc<DomainMesh>) -> Result<MapField> {
        let target = &self.target;
        let field = match &self.initial {
            InitialMap::Constant { value } => MapField::constant(mesh, target.clone(), value),
            InitialMap::Identity => {
                if mesh.kind() != MeshKind::Icosphere2 || *target != TargetManifold::sphere(2) {
                    bail!("config field `initial`: the identity needs an icosphere mesh and the unit 2-sphere target");
                }
                MapField::from_fn(mesh, target.clone(), |x| x.to_vec())
            }
            InitialMap::Degree { degree, scale } => degree_map(mesh, target, *degree, *scale),
            InitialMap::File { path } => {
                if !path.exists() {
                    bail!("config field `initial.path`: field file {} does not exist", path.display());
                }
                let f = read_field(path).context("config field `initial.path`")?;
                if f.target() != target {
                    bail!("config field `initial.path`: stored target differs from `target`");
                }
                if f.mesh() != mesh.as_ref() {
                    bail!("config field `initial.path`: stored mesh differs from `mesh`");
                }
                Ok(f)
            }
        };
        field_err(field, "initial")
    }

    /// Builds and validates every input.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mesh = Arc::new(self.build_mesh()?);
        let params = self.build_params(mesh.dim())?;
        let schedule = self.build_schedule(&params)?;
        field_err(self.solver.validate(), "solver")?;
        let initial = self.build_initial(mesh)?;
        Ok(ResolvedRun {
            initial,
            params,
            schedule,
            solver: self.solver,
            diagnostics: self.diagnostics,
            output_dir: self.output_dir.clone(),
        })
    }
}
