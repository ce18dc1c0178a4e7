//! The subcommands as library functions returning values; `main` only
//! parses arguments, prints and picks exit codes.

use crate::config::RunConfig;
use crate::io::{
    write_field, write_json, write_ladder_csv, write_trace_csv, CordesRow, LadderCsvRow,
    TraceCsvRow, SCHEMA_VERSION,
};
use anyhow::{bail, Context, Result};
use nharm_core::bubbling::{energy_identity_report, final_report, BubbleReport, ReportConfig};
use nharm_core::energy::total_energy;
use nharm_core::kernel::{
    contraction_factor, convexity_bound_check, cordes_epsilon_max, default_p0, monotonicity_c0, monotonicity_c1,
    monotonicity_gap, rescaling_identity_check, sandwich_check, uniqueness_lower_check, uniqueness_upper_check,
    v_map, weight, SlackCheck, IDENTITY_TOL, SLACK_TOL,
};
use nharm_core::solver::{minimize, run_continuation, ContinuationRun, SolveStatus};
use nharm_core::{GrowthParams, MapField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::{Path, PathBuf};

/// Builds the global thread pool; `None` keeps the default.
pub fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        if t == 0 {
            bail!("`--threads` must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("cannot build the thread pool")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityStat {
    pub name: String,
    pub violations: usize,
    /// Smallest `slack / scale` seen.
    pub min_relative_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityStat {
    pub name: String,
    pub violations: usize,
    pub max_relative_error: f64,
}

/// The first failing sample, echoed for reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub sample: usize,
    pub params: GrowthParams,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySummary {
    pub schema_version: u32,
    pub samples: usize,
    pub seed: u64,
    pub passed: bool,
    pub inequalities: Vec<InequalityStat>,
    pub identities: Vec<IdentityStat>,
    pub first_violation: Option<Violation>,
}

/// One random draw: `n in {2, 3}`, `N in {1, 2, 3}`, `p in (n, n+1)`,
/// `delta, s in [0, 1]`, `n x N` matrices with `|X|, |Y| <= 10`, and a
/// scale `r in [1e-3, 10]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub params: GrowthParams,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
}

fn unit_ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let t: f64 = v.iter().map(|a| a * a).sum();
        if t > 1e-6 && t <= 1.0 {
            let l = t.sqrt();
            return v.into_iter().map(|a| a / l).collect();
        }
    }
}

/// Half the draws log-uniform in `[1e-5, 10]`, half uniform in the ball.
fn ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let dir = unit_ball_point(rng, dim);
    let radius = if rng.random_bool(0.5) {
        10f64.powf(rng.random_range(-5.0..=1.0))
    } else {
        10.0 * rng.random_range(0.0f64..=1.0).powf(1.0 / dim as f64)
    };
    dir.into_iter().map(|a| a * radius).collect()
}

pub fn draw_sample(rng: &mut ChaCha8Rng) -> KernelSample {
    let n = rng.random_range(2usize..=3);
    let target_dim = rng.random_range(1usize..=3);
    let frac = loop {
        let f: f64 = rng.random_range(0.0..1.0);
        if f > 0.0 {
            break f;
        }
    };
    let delta = rng.random_range(0.0..=1.0);
    let s = rng.random_range(0.0..=1.0);
    let params = GrowthParams::new(n, target_dim, n as f64 + frac, delta, s).expect("sampled parameters are valid");
    let dim = n * target_dim;
    let x = ball_point(rng, dim);
    let y = match rng.random_range(0..8) {
        // Nearly coincident and antipodal pairs.
        0 => x.iter().map(|a| a * (1.0 + 1e-3 * rng.random_range(-1.0..1.0))).collect(),
        1 => x.iter().map(|a| -a * rng.random_range(0.0..1.0)).collect(),
        _ => ball_point(rng, dim),
    };
    let r = 10f64.powf(rng.random_range(-3.0..=1.0));
    KernelSample { params, x, y, r }
}

struct Tally {
    name: &'static str,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, worst: f64) -> Self {
        Tally { name, violations: 0, worst }
    }
}

fn relative(slack: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        slack / scale
    } else {
        slack
    }
}

/// Runs every sampled kernel inequality and identity with a fixed seed.
pub fn check_inequalities(samples: usize, seed: u64) -> Result<InequalitySummary> {
    if samples == 0 {
        bail!("`--samples` must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ineq = [
        "monotonicity_pairing",
        "monotonicity_p_gap",
        "uniqueness_lower",
        "uniqueness_upper",
        "sandwich_lower",
        "sandwich_upper",
        "convexity",
    ]
    .map(|n| Tally::new(n, f64::INFINITY));
    let mut ident = ["rescaling_identity", "v_map_norm"].map(|n| Tally::new(n, 0.0));
    let mut first_violation = None;
    for i in 0..samples {
        let sm = draw_sample(&mut rng);
        let p = &sm.params;
        let (c0, c1) = (monotonicity_c0(p.n), monotonicity_c1(p.n));
        let gap = monotonicity_gap(&sm.x, &sm.y, p);
        let chain = |slack: f64, scale: f64| SlackCheck {
            holds: slack >= -SLACK_TOL * scale,
            slack,
            scale,
        };
        let convex = GrowthParams {
            s: 1.0,
            p: p.p.min(default_p0(p.n)),
            ..*p
        };
        let sw = sandwich_check(&sm.x, p);
        let checks = [
            chain(gap.pairing - c0 * gap.v_gap, gap.pairing.abs().max(gap.v_gap)),
            chain(c0 * gap.v_gap - c1 * gap.p_gap, (c0 * gap.v_gap).max(gap.p_gap)),
            uniqueness_lower_check(&sm.x, &sm.y, p),
            uniqueness_upper_check(&sm.x, &sm.y, p),
            sw.lower,
            sw.upper,
            convexity_bound_check(&sm.x, &convex)?,
        ];
        for (tally, c) in ineq.iter_mut().zip(checks) {
            tally.worst = tally.worst.min(relative(c.slack, c.scale));
            if !c.holds {
                tally.violations += 1;
                first_violation.get_or_insert_with(|| violation(tally.name, i, &sm));
            }
        }
        let t: f64 = sm.x.iter().map(|a| a * a).sum();
        let v2: f64 = v_map(&sm.x, p).iter().map(|a| a * a).sum();
        let expect = weight(t, p) * t;
        let v_err = if expect == 0.0 { v2.abs() } else { (v2 - expect).abs() / expect };
        let errs = [rescaling_identity_check(&sm.x, sm.r, p)?.rel_err, v_err];
        for (tally, e) in ident.iter_mut().zip(errs) {
            tally.worst = tally.worst.max(e);
            if !(e <= IDENTITY_TOL) {
                tally.violations += 1;
                first_violation.get_or_insert_with(|| violation(tally.name, i, &sm));
            }
        }
    }
    Ok(InequalitySummary {
        schema_version: SCHEMA_VERSION,
        samples,
        seed,
        passed: first_violation.is_none(),
        inequalities: ineq
            .into_iter()
            .map(|t| InequalityStat {
                name: t.name.into(),
                violations: t.violations,
                min_relative_slack: t.worst,
            })
            .collect(),
        identities: ident
            .into_iter()
            .map(|t| IdentityStat {
                name: t.name.into(),
                violations: t.violations,
                max_relative_error: t.worst,
            })
            .collect(),
        first_violation,
    })
}

fn violation(check: &str, sample: usize, sm: &KernelSample) -> Violation {
    Violation {
        check: check.into(),
        sample,
        params: sm.params,
        x: sm.x.clone(),
        y: sm.y.clone(),
        r: sm.r,
    }
}

/// `"a,b,c"` or `"start:stop:count"` (inclusive, evenly spaced); empty is empty.
pub fn parse_p_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if let [a, b, c] = spec.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        let count: usize = c.trim().parse()?;
        return Ok(match count {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
        });
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`")))
        .collect()
}

/// `"a,b,c"` or `"lo:hi"` (inclusive); empty is empty.
pub fn parse_nn_grid(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if let [a, b] = spec.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad grid value `{v}`")))
        .collect()
}

/// `epsilon_max` and `sqrt(1 - epsilon_max)` over `p_grid x nn_grid`, `p` outer.
pub fn cordes_table(p_grid: &[f64], nn_grid: &[usize]) -> Result<Vec<CordesRow>> {
    let mut rows = Vec::with_capacity(p_grid.len() * nn_grid.len());
    for &p in p_grid {
        for &nn in nn_grid {
            let eps = cordes_epsilon_max(p, nn)?;
            rows.push(CordesRow {
                p,
                nn,
                epsilon_max: eps,
                contraction_factor: if eps > 0.0 { Some(contraction_factor(eps)?) } else { None },
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub steps_scheduled: usize,
    pub steps_completed: usize,
    pub degree_jump_at: Option<usize>,
    /// Steps that stopped at `max_iters` or on a stalled line search.
    pub unconverged_steps: Vec<usize>,
    pub final_energy: Option<f64>,
    pub final_dirichlet: Option<f64>,
    pub final_degree: Option<i64>,
}

/// Everything `run` produced, kept in memory for callers.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub params: GrowthParams,
    pub run: ContinuationRun,
    pub report: Option<BubbleReport>,
    pub summary: RunSummary,
}

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const LADDER_FILE: &str = "ladder.csv";
pub const FIELD_FILE: &str = "field.json";
pub const SUMMARY_FILE: &str = "summary.json";

fn output_dir(cli: Option<&Path>, cfg: Option<&PathBuf>) -> Result<PathBuf> {
    let dir = cli
        .map(Path::to_path_buf)
        .or_else(|| cfg.cloned())
        .context("no output directory: pass `--out` or set `output_dir`")?;
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

/// Runs the continuation and writes the trace, final field, report and
/// ladder. A degree jump still writes the steps completed so far.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let resolved = cfg.resolve()?;
    let out_dir = output_dir(out, resolved.output_dir.as_ref())?;
    let run = run_continuation(&resolved.initial, &resolved.params, &resolved.schedule, &resolved.solver)?;
    let rows: Vec<TraceCsvRow> = run.trace.rows.iter().map(TraceCsvRow::from).collect();
    write_trace_csv(File::create(out_dir.join(TRACE_FILE))?, &rows)?;
    let last = run.results.last().map(|r| &r.field).unwrap_or(&resolved.initial);
    write_field(&out_dir.join(FIELD_FILE), last)?;
    let report = if resolved.diagnostics.bubble_report {
        let rep = energy_identity_report(&run, &resolved.params, &resolved.diagnostics.report)?;
        write_json(&out_dir.join(REPORT_FILE), &rep)?;
        let ladder: Vec<LadderCsvRow> = rep.neck_ladder.iter().map(LadderCsvRow::from).collect();
        write_ladder_csv(File::create(out_dir.join(LADDER_FILE))?, &ladder)?;
        Some(rep)
    } else {
        None
    };
    let last_row = run.trace.rows.last();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        steps_scheduled: resolved.schedule.len(),
        steps_completed: run.trace.rows.len(),
        degree_jump_at: run.degree_jump_at,
        unconverged_steps: run
            .trace
            .rows
            .iter()
            .filter(|r| r.status == SolveStatus::MaxIters)
            .map(|r| r.k)
            .collect(),
        final_energy: last_row.map(|r| r.energy),
        final_dirichlet: last_row.map(|r| r.dirichlet),
        final_degree: last_row.and_then(|r| r.degree),
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutcome {
        out_dir,
        params: resolved.params,
        run,
        report,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    BubblesFound,
    NoConcentration,
    /// The threshold exceeds the total energy, so nothing can cross it.
    ThresholdAboveTotalEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleReportOutput {
    pub schema_version: u32,
    pub status: ReportStatus,
    pub threshold: f64,
    pub params: GrowthParams,
    pub report: BubbleReport,
}

/// One-shot diagnostics on a stored field.
pub fn bubble_report(field: &MapField, params: &GrowthParams, config: &ReportConfig) -> Result<BubbleReportOutput> {
    let report = final_report(field, params, Vec::new(), config)?;
    let threshold = config.threshold_value();
    let status = if !report.bubbles.is_empty() {
        ReportStatus::BubblesFound
    } else if threshold > total_energy(field, params).total {
        ReportStatus::ThresholdAboveTotalEnergy
    } else {
        ReportStatus::NoConcentration
    };
    Ok(BubbleReportOutput {
        schema_version: SCHEMA_VERSION,
        status,
        threshold,
        params: *params,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSummary {
    pub schema_version: u32,
    pub params: GrowthParams,
    pub status: SolveStatus,
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
    pub degree: Option<i64>,
    pub diagnostic: Option<String>,
}

pub const MINIMIZE_FILE: &str = "minimize.json";

/// A single minimisation at the initial `params`, without continuation.
pub fn minimize_config(cfg: &RunConfig, out: Option<&Path>) -> Result<(MinimizeSummary, MapField)> {
    let resolved = cfg.resolve()?;
    let out_dir = output_dir(out, resolved.output_dir.as_ref())?;
    let res = minimize(&resolved.initial, &resolved.params, &resolved.solver)?;
    write_field(&out_dir.join(FIELD_FILE), &res.field)?;
    let summary = MinimizeSummary {
        schema_version: SCHEMA_VERSION,
        params: resolved.params,
        status: res.status,
        iterations: res.iterations,
        energy: res.energy,
        residual: res.residual,
        degree: res.degree_trace.last().copied(),
        diagnostic: res.diagnostic,
    };
    write_json(&out_dir.join(MINIMIZE_FILE), &summary)?;
    Ok((summary, res.field))
}
