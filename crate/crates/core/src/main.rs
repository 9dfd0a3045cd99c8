use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use replidyn::config::{parse_config, parse_sweep, ExperimentConfig};
use replidyn::experiment::{self, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK};
use replidyn::{blowup, initdata, io, Error, Result};

/// Overrides `output.dir` from the config.
const OUT_ENV: &str = "REPLIDYN_OUT";

#[derive(Parser)]
#[command(name = "replidyn", version, about = "Simulate and check the degenerate nonlocal equation u_t = u Δu + u ∫|∇u|²")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run initial data, solver, diagnostics and blow-up analysis.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a parameter sweep described by `sweep.*` keys.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sweep.parallelism`.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Recheck estimates on a saved trace and snapshots; prints `check,t,value,bound,pass`.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
        /// Comma-separated check groups; all when omitted.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// Grid, ε, cap and tolerances; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build regularized initial data; writes the snapshot and a property report.
    Initdata {
        #[arg(long)]
        config: PathBuf,
    },
    /// Blow-up analysis of a saved run; prints `metric,value`.
    Blowup {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate replicator dynamics from `replicator.*` keys.
    Replicator {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let mut c = parse_config(&fs::read_to_string(path)?)?;
    if let Some(dir) = std::env::var_os(OUT_ENV) {
        c.output_dir = PathBuf::from(dir);
    }
    Ok(c)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    std::io::stdout().write_all(bytes)?;
    if let Some(p) = out {
        io::write_atomic(p, bytes)?;
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config } => {
            let c = read_config(&config)?;
            let (code, report) = experiment::run_experiment(&c);
            let r = report?;
            let s = &r.summary;
            println!(
                "outcome {} t_last {} t_max_estimate {} final_mass {} checks_failed {}/{} -> {}",
                s.outcome,
                s.t_last,
                s.t_max_estimate.map_or("none".to_string(), |v| v.to_string()),
                s.final_mass,
                s.checks_failed,
                s.checks_run,
                c.output_dir.display()
            );
            if let Some(note) = &s.blowup_note {
                eprintln!("blow-up set analysis skipped: {note}");
            }
            for ch in r.checks.iter().filter(|ch| !ch.pass).take(10) {
                eprintln!("failed {} at t={}: {} vs {}", ch.check, ch.t, ch.value, ch.bound);
            }
            Ok(code)
        }
        Command::Sweep { config, parallelism } => {
            let mut spec = parse_sweep(&fs::read_to_string(&config)?)?;
            if let Some(dir) = std::env::var_os(OUT_ENV) {
                spec.base.output_dir = PathBuf::from(dir);
            }
            if let Some(p) = parallelism {
                if p == 0 {
                    return Err(Error::Precondition("--parallelism must be at least 1".into()));
                }
                spec.parallelism = p;
            }
            let report = experiment::run_sweep(&spec)?;
            for row in &report.rows {
                println!("{} = {}: {}", spec.axis.name(), row.axis_value, row.outcome);
            }
            Ok(report.exit_code)
        }
        Command::Verify { trace, snapshots, checks, config, out } => {
            let c = config.as_deref().map(read_config).transpose()?;
            let run = experiment::load_run(&trace, &snapshots, c.as_ref())?;
            let d = c.map(|c| c.diagnostics).unwrap_or_default();
            let rows = experiment::estimate_checks(&run.grid, &d, &run.trace, &run.snapshots, run.reached_cap(), checks.as_deref())?;
            emit(&io::checks_csv(&rows)?, out.as_deref())?;
            Ok(if rows.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Initdata { config } => {
            let c = read_config(&config)?;
            let grid = c.grid.build()?;
            let recipe = experiment::recipe(&grid, &c)?;
            let built = initdata::construct_initial(&grid, &recipe)?;
            let report = initdata::verify_approx_properties(&grid, &built, &recipe)?;
            let snap = replidyn::Snapshot { t: 0.0, values: built.u0eps.values.clone() };
            io::write_snapshots(&c.output_dir.join("initdata.ndjson"), &grid, &[snap])?;
            let csv = io::properties_csv(&report)?;
            emit(&csv, Some(&c.output_dir.join("initdata_report.csv")))?;
            Ok(if report.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Blowup { trace, snapshots, config, out } => {
            let c = config.as_deref().map(read_config).transpose()?;
            let run = experiment::load_run(&trace, &snapshots, c.as_ref())?;
            let d = c.map(|c| c.diagnostics).unwrap_or_default();
            let report = blowup::analyze_trace(&run.grid, &run.trace, &run.snapshots, d.growth_threshold, &[d.margin])?;
            emit(&io::metrics_csv(&experiment::blowup_metrics(&report))?, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Replicator { config } => {
            let c = read_config(&config)?;
            let rep = c.replicator.as_ref().ok_or_else(|| Error::Precondition("config has no `replicator.payoff`".into()))?;
            let tr = experiment::run_replicator(rep, c.seed)?;
            let (bytes, ext) = io::replicator_trace_bytes(&tr.times, &tr.states)?;
            let path = c.output_dir.join(format!("replicator.{ext}"));
            io::write_atomic(&path, &bytes)?;
            let last = tr.states.last().map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default();
            println!("t {} p {} max_clip {:e} -> {}", tr.times.last().unwrap_or(&0.0), last, tr.max_clip, path.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
