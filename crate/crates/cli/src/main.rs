use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nharm::commands::{self, ReportStatus};
use nharm::io::{read_field, write_cordes_csv, write_json, write_ladder_csv, LadderCsvRow};
use nharm::RunConfig;
use nharm_core::bubbling::ReportConfig;
use nharm_core::GrowthParams;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Double-phase approximations of n-harmonic maps: inequality checks,
/// Cordes tables, continuation runs and bubbling reports.
#[derive(Parser)]
#[command(name = "nharm", version)]
struct Cli {
    /// Worker threads for cell assembly.
    #[arg(long, global = true, env = "NHARM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the pointwise inequalities and identities with a fixed seed.
    CheckInequalities {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `inequalities.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate epsilon_max and the contraction factor as CSV.
    Cordes {
        /// `a,b,c` or `start:stop:count`.
        #[arg(long, default_value = "1:5:17")]
        p_grid: String,
        /// `a,b,c` or `lo:hi`.
        #[arg(long, default_value = "1:12")]
        nn_grid: String,
        /// Write `cordes.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a continuation from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bubbling diagnostics on a stored field.
    BubbleReport {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Concentration level; defaults to 0.3 * 4 pi.
        #[arg(long)]
        threshold: Option<f64>,
        /// Write `report.json` and `ladder.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One minimisation at the config's initial parameters.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir.join(name))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    commands::init_threads(cli.threads)?;
    match cli.command {
        Command::CheckInequalities { samples, seed, out } => {
            let summary = commands::check_inequalities(samples, seed)?;
            if let Some(dir) = out {
                write_json(&out_file(&dir, "inequalities.json")?, &summary)?;
            }
            print_json(&summary)?;
            if let Some(v) = &summary.first_violation {
                eprintln!("violated `{}` at sample {}: {}", v.check, v.sample, serde_json::to_string(v)?);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Cordes { p_grid, nn_grid, out } => {
            let p = commands::parse_p_grid(&p_grid).context("`--p-grid`")?;
            let nn = commands::parse_nn_grid(&nn_grid).context("`--nn-grid`")?;
            let rows = commands::cordes_table(&p, &nn)?;
            match out {
                Some(dir) => write_cordes_csv(File::create(out_file(&dir, "cordes.csv")?)?, &rows)?,
                None => write_cordes_csv(std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = commands::run(&cfg, out.as_deref())?;
            print_json(&outcome.summary)?;
            if let Some(k) = outcome.run.degree_jump_at {
                eprintln!("degree jump at continuation step {k}; artifacts hold steps 0..={k}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::BubbleReport { field, p, delta, s, threshold, out } => {
            let field = read_field(&field)?;
            let params = GrowthParams::new(field.mesh().dim(), field.ambient_dim(), p, delta, s)?;
            let config = ReportConfig { threshold, ..ReportConfig::default() };
            let report = commands::bubble_report(&field, &params, &config)?;
            match out {
                Some(dir) => {
                    write_json(&out_file(&dir, commands::REPORT_FILE)?, &report)?;
                    let ladder: Vec<LadderCsvRow> = report.report.neck_ladder.iter().map(LadderCsvRow::from).collect();
                    write_ladder_csv(File::create(dir.join(commands::LADDER_FILE))?, &ladder)?;
                }
                None => print_json(&report)?,
            }
            if report.status == ReportStatus::ThresholdAboveTotalEnergy {
                eprintln!("threshold {} exceeds the total energy; no concentration possible", report.threshold);
            }
        }
        Command::Minimize { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let (summary, _) = commands::minimize_config(&cfg, out.as_deref())?;
            print_json(&summary)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
