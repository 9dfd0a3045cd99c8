//! Experiment pipeline: initial data, solver, diagnostics and blow-up
//! analysis, with artifacts written per run.

use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blowup;
use crate::config::{DiagnosticsConfig, ExperimentConfig, InitKind, InitialFrequencies, PayoffSpec, ReplicatorConfig, SweepSpec};
use crate::diagnostics::{self, BumpTest, CheckRow};
use crate::elliptic::{solve_torsion, solve_torsion_subdomain};
use crate::error::{Error, Result};
use crate::initdata::{self, InitDataRecipe, InitDataResult};
use crate::io;
use crate::mesh::{Field, Grid};
use crate::real::{DoubleDouble, Precision};
use crate::replicator::{self, PayoffMatrix, ReplicatorTrace};
use crate::solver::{self, Outcome, SimulationResult};
use crate::trace::{Snapshot, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Flat run summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub outcome: String,
    pub t_last: f64,
    pub t_max_estimate: Option<f64>,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_mass_drift: f64,
    pub max_mass_ode_residual: Option<f64>,
    pub h_identity_error: Option<f64>,
    pub weak_form_residual: Option<f64>,
    pub blowup_set_fraction: Option<f64>,
    pub sup_cap: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub floor_flagged: bool,
    pub checks_run: usize,
    pub checks_failed: usize,
    /// Why the blow-up set analysis was skipped.
    pub blowup_note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub checks: Vec<CheckRow>,
    pub blowup: Option<blowup::BlowupReport>,
    pub result: SimulationResult,
    pub exit_code: i32,
}

/// Corrected-mass-`m` torsion profile, or the constructed data built from it.
pub fn initial_data(grid: &Grid, config: &ExperimentConfig) -> Result<(Field, Option<(InitDataRecipe, InitDataResult)>)> {
    let eps = config.solver.epsilon;
    match config.init.kind {
        InitKind::Torsion => Ok((initdata::torsion_profile::<f64>(grid, eps, config.init.mass)?, None)),
        InitKind::Constructed => {
            let recipe = recipe(grid, config)?;
            let built = initdata::construct_initial(grid, &recipe)?;
            Ok((built.u0eps.clone(), Some((recipe, built))))
        }
    }
}

/// Recipe whose target `u0` is the zero-boundary torsion profile of mass `m`.
pub fn recipe(grid: &Grid, config: &ExperimentConfig) -> Result<InitDataRecipe> {
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    let u0 = initdata::torsion_profile::<f64>(grid, 0.0, config.init.mass)?;
    InitDataRecipe::with_headroom(
        grid,
        u0,
        config.solver.epsilon,
        config.init.mollify_radius.unwrap_or(h),
        config.init.margin_theta,
        config.init.margin_rho.unwrap_or(3.0 * h),
    )
}

fn simulate(grid: &Grid, config: &ExperimentConfig, u0: &Field) -> Result<SimulationResult> {
    // Torsion data is rebuilt in the run precision so that the unit-mass
    // profile stays an exact discrete steady state.
    match (config.init.kind, config.solver.precision) {
        (InitKind::Torsion, Precision::DoubleDouble) => {
            solver::run(grid, initdata::torsion_profile::<DoubleDouble>(grid, config.solver.epsilon, config.init.mass)?, &config.solver)
        }
        _ => solver::run_with_precision(grid, u0, &config.solver),
    }
}

/// Check groups accepted by [`estimate_checks`].
pub const CHECK_GROUPS: &[&str] =
    &["mass_ode", "h_identity", "comparison", "phi_norm", "energy_odi", "gradient", "boundary_concentration", "growth", "weak_form"];

/// Estimate checks on a trace and its snapshots; the first snapshot is taken
/// as the initial data. `only` restricts the run to the named groups.
pub fn estimate_checks(
    grid: &Grid,
    d: &DiagnosticsConfig,
    trace: &Trace,
    snapshots: &[Snapshot],
    blew_up: bool,
    only: Option<&[String]>,
) -> Result<Vec<CheckRow>> {
    if let Some(names) = only {
        if let Some(bad) = names.iter().find(|n| !CHECK_GROUPS.contains(&n.as_str())) {
            return Err(Error::Precondition(format!("unknown check `{bad}` (expected one of {})", CHECK_GROUPS.join(", "))));
        }
    }
    let on = |g: &str| only.map_or(true, |names| names.iter().any(|n| n == g));
    let first = snapshots.first().ok_or_else(|| Error::Diagnostic("checks need at least the initial snapshot".into()))?;
    grid.check_len(&first.values)?;
    let u0 = Field::new(first.values.clone());
    let eps = trace.epsilon;
    let mut checks = Vec::new();

    let resolved = trace.prefix(trace.resolved_prefix());
    let t_resolved = resolved.rows.last().map_or(0.0, |r| r.t);
    if resolved.len() >= 3 {
        if on("mass_ode") {
            let m = diagnostics::mass_ode_residual(&resolved)?;
            checks.push(CheckRow::new("mass_ode_residual", t_resolved, m.normalized, d.mass_ode_tol, m.normalized <= d.mass_ode_tol));
        }
        if on("h_identity") && trace.corrected_mass(0) > 1.0 {
            let h = diagnostics::h_identity_check(&resolved)?;
            checks.push(CheckRow::new("h_identity", t_resolved, h.relative_error, d.h_identity_tol, h.relative_error <= d.h_identity_tol));
        }
    }

    let pre = trace.prefix(trace.pre_cap_prefix());
    let t_cut = pre.rows.last().map_or(0.0, |r| r.t);
    let snaps: Vec<_> = snapshots.iter().filter(|s| s.t <= t_cut).cloned().collect();
    if on("comparison") {
        checks.extend(diagnostics::comparison_bound_check(&pre, &solve_torsion(grid)?, d.comparison_tol)?);
    }
    if on("phi_norm") {
        checks.extend(diagnostics::phi_norm_bound_check(&pre, d.phi_tol));
    }
    if on("energy_odi") {
        checks.extend(diagnostics::energy_odi_check(&pre, d.odi_tol));
    }
    if on("gradient") {
        let sub = solve_torsion_subdomain(grid, d.margin)?;
        checks.extend(diagnostics::gradient_bound_check(grid, &pre, &snaps, &sub, &u0, d.gradient_tol)?);
    }
    if on("boundary_concentration") {
        let bc = diagnostics::boundary_concentration(grid, &snaps, d.boundary_q, d.margin, &u0, eps)?;
        checks.push(CheckRow::new("boundary_concentration", t_cut, bc.lhs, bc.bound, bc.lhs <= bc.bound));
        checks.push(CheckRow::new("collar_energy", t_cut, bc.collar_energy, bc.collar_bound, bc.collar_energy <= bc.collar_bound));
    }
    if blew_up {
        if on("growth") {
            checks.extend(diagnostics::unbounded_growth_check(&pre, d.growth_threshold)?);
        }
    } else if on("weak_form") && d.weak_form && snapshots.len() >= 4 {
        let t_last = snapshots.last().map_or(0.0, |s| s.t);
        let ext = grid.extents();
        let test = BumpTest {
            centre: [0.5 * ext[0], 0.5 * ext.get(1).copied().unwrap_or(0.0)],
            radius: [0.4 * ext[0], 0.4 * ext.get(1).copied().unwrap_or(1.0)],
            t_centre: 0.0,
            t_radius: 0.8 * t_last,
            dimension: grid.dimension(),
        };
        let w = diagnostics::weak_form_residual(grid, snapshots, &test, eps)?;
        checks.push(CheckRow::new("weak_form_residual", t_last, w.normalized_residual, d.weak_form_tol, w.normalized_residual <= d.weak_form_tol));
    }
    Ok(checks)
}

fn summarize(result: &SimulationResult, checks: &[CheckRow]) -> Summary {
    let trace = &result.trace;
    let y = trace.corrected_masses();
    let value = |name: &str| checks.iter().find(|c| c.check == name).map(|c| c.value);
    Summary {
        outcome: result.outcome.name().to_string(),
        t_last: trace.rows.last().map_or(0.0, |r| r.t),
        t_max_estimate: result.outcome.t_max_estimate(),
        initial_mass: y[0],
        final_mass: *y.last().unwrap_or(&y[0]),
        max_mass_drift: y.iter().map(|v| (v - y[0]).abs()).fold(0.0, f64::max),
        max_mass_ode_residual: value("mass_ode_residual"),
        h_identity_error: value("h_identity"),
        weak_form_residual: value("weak_form_residual"),
        blowup_set_fraction: None,
        sup_cap: result.sup_cap,
        steps: result.steps,
        rejected_steps: result.rejected_steps,
        floor_flagged: result.floor_flagged,
        checks_run: checks.len(),
        checks_failed: checks.iter().filter(|c| !c.pass).count(),
        blowup_note: None,
    }
}

/// `metric,value` rows of a blow-up report.
pub fn blowup_metrics(report: &blowup::BlowupReport) -> Vec<(String, f64)> {
    let mut m = vec![
        ("t_max_estimate".to_string(), report.t_max_estimate),
        ("fit_residual".to_string(), report.fit_residual),
        ("t_last".to_string(), report.t_last),
        ("blowup_set_fraction".to_string(), report.set.blowup_set_fraction),
    ];
    for (margin_k, g) in &report.set.core_min_growth {
        m.push((format!("core_min_growth_{margin_k}"), *g));
    }
    let g = &report.set.growth_factors;
    m.push(("min_growth".to_string(), g.iter().cloned().fold(f64::INFINITY, f64::min)));
    m.push(("max_growth".to_string(), g.iter().cloned().fold(f64::NEG_INFINITY, f64::max)));
    for (k, t) in report.set.checkpoint_times.iter().enumerate() {
        m.push((format!("checkpoint_time_{k}"), *t));
    }
    m
}

/// Executes the pipeline without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunReport> {
    let grid = config.grid.build()?;
    let (u0, _) = initial_data(&grid, config)?;
    let result = simulate(&grid, config, &u0)?;
    let checks = if config.diagnostics.enabled {
        estimate_checks(&grid, &config.diagnostics, &result.trace, &result.snapshots, result.outcome.is_blowup(), None)?
    } else {
        Vec::new()
    };
    let mut summary = summarize(&result, &checks);
    let mut report = None;
    if let Outcome::BlowUp { .. } = result.outcome {
        // Too few late snapshots only loses the set estimate.
        match blowup::analyze(&grid, &result, config.diagnostics.growth_threshold, &[config.diagnostics.margin]) {
            Ok(b) => {
                summary.t_max_estimate = Some(b.t_max_estimate);
                summary.blowup_set_fraction = Some(b.set.blowup_set_fraction);
                report = Some(b);
            }
            Err(Error::Precondition(msg)) => summary.blowup_note = Some(msg),
            Err(e) => return Err(e),
        }
    }
    let exit_code = if summary.checks_failed > 0 { EXIT_CHECK_FAILED } else { EXIT_OK };
    Ok(RunReport { summary, checks, blowup: report, result, exit_code })
}

/// Writes `trace.csv`, `snapshots.ndjson`, `diagnostics.csv`, `summary.json`
/// and, for blow-up runs, `blowup.csv` into `dir`.
pub fn write_artifacts(dir: &Path, grid: &Grid, report: &RunReport) -> Result<()> {
    io::write_trace(&dir.join("trace.csv"), &report.result.trace)?;
    io::write_snapshots(&dir.join("snapshots.ndjson"), grid, &report.result.snapshots)?;
    io::write_atomic(&dir.join("diagnostics.csv"), &io::checks_csv(&report.checks)?)?;
    if let Some(b) = &report.blowup {
        io::write_atomic(&dir.join("blowup.csv"), &io::metrics_csv(&blowup_metrics(b))?)?;
    }
    let mut json = serde_json::to_vec_pretty(&report.summary)?;
    json.push(b'\n');
    io::write_atomic(&dir.join("summary.json"), &json)
}

/// Runs one experiment into `config.output_dir`. Returns the exit status:
/// 0 on success, 2 if a diagnostic failed, 1 on any module error (with the
/// message).
pub fn run_experiment(config: &ExperimentConfig) -> (i32, Result<RunReport>) {
    let go = || -> Result<RunReport> {
        let report = execute(config)?;
        write_artifacts(&config.output_dir, &config.grid.build()?, &report)?;
        Ok(report)
    };
    match go() {
        Ok(r) => (r.exit_code, Ok(r)),
        Err(e) => (EXIT_ERROR, Err(e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub outcome: String,
    pub t_max_estimate: Option<f64>,
    pub max_mass_ode_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Per-run exit codes, in sweep order.
    pub exit_codes: Vec<i32>,
    /// Final state of each successful run, in sweep order.
    pub final_states: Vec<Option<Field>>,
    pub exit_code: i32,
}

/// Runs every sweep point on a pool of `spec.parallelism` threads, each into
/// its own directory, then writes `sweep_summary.csv` in the base output
/// directory.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.parallelism).build().map_err(|e| Error::Precondition(e.to_string()))?;
    let runs: Vec<(i32, Result<RunReport>)> = pool.install(|| {
        (0..spec.values.len())
            .into_par_iter()
            .map(|i| match spec.config_for(i) {
                Ok(c) => run_experiment(&c),
                Err(e) => (EXIT_ERROR, Err(e)),
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut exit_codes = Vec::new();
    let mut final_states = Vec::new();
    for (&v, (code, res)) in spec.values.iter().zip(runs) {
        exit_codes.push(code);
        match res {
            Ok(r) => {
                rows.push(SweepRow {
                    axis_value: v,
                    outcome: r.summary.outcome.clone(),
                    t_max_estimate: r.summary.t_max_estimate,
                    max_mass_ode_residual: r.summary.max_mass_ode_residual,
                });
                final_states.push(Some(r.result.final_u));
            }
            Err(e) => {
                rows.push(SweepRow { axis_value: v, outcome: format!("Failed: {e}"), t_max_estimate: None, max_mass_ode_residual: None });
                final_states.push(None);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    io::write_atomic(&spec.base.output_dir.join("sweep_summary.csv"), &bytes)?;
    let exit_code = if exit_codes.iter().all(|&c| c == EXIT_OK) { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok(SweepReport { rows, exit_codes, final_states, exit_code })
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct SavedRun {
    pub grid: Grid,
    pub trace: Trace,
    pub snapshots: Vec<Snapshot>,
}

impl SavedRun {
    /// Whether the trace reached the blow-up cap.
    pub fn reached_cap(&self) -> bool {
        self.trace.rows.last().is_some_and(|r| r.sup_norm >= self.trace.sup_cap)
    }
}

/// Reads a trace CSV and snapshot NDJSON. The grid and ε come from `config`
/// when given; otherwise the grid is the unit box with the snapshot shape and
/// ε is the default. The cap is the configured one or the default derived
/// from the first snapshot.
pub fn load_run(trace_path: &Path, snapshots_path: &Path, config: Option<&ExperimentConfig>) -> Result<SavedRun> {
    let (snapshots, counts) = io::read_snapshots(snapshots_path)?;
    let grid = match config {
        Some(c) => c.grid.build()?,
        None => Grid::new(counts.len(), &vec![1.0; counts.len()], &counts)?,
    };
    if grid.counts() != counts.as_slice() {
        return Err(Error::Precondition(format!("snapshot shape {counts:?} does not match grid {:?}", grid.counts())));
    }
    let eps = config.map_or(crate::solver::SolverParams::default().epsilon, |c| c.solver.epsilon);
    let cap = match config.and_then(|c| c.solver.sup_cap) {
        Some(cap) => cap,
        None => solver::default_sup_cap(&Field::new(snapshots[0].values.clone()), &solve_torsion(&grid)?, eps),
    };
    let trace = io::read_trace(trace_path, eps, grid.measure(), cap)?;
    Ok(SavedRun { grid, trace, snapshots })
}

/// Uniform draws from the config seed, normalized onto the simplex.
fn random_simplex(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..m).map(|_| ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn replicator_payoff(rep: &ReplicatorConfig) -> Result<PayoffMatrix> {
    match &rep.payoff {
        PayoffSpec::Identity { m } => Ok(PayoffMatrix::identity(*m)),
        PayoffSpec::Matrix { m, entries } => PayoffMatrix::new(*m, entries.clone()),
        PayoffSpec::Kernel { n, sigma } => replicator::payoff_matrix_from_kernel(&Grid::unit_interval(*n)?, *sigma),
    }
}

pub fn run_replicator(rep: &ReplicatorConfig, seed: u64) -> Result<ReplicatorTrace> {
    let a = replicator_payoff(rep)?;
    let m = a.size();
    let p0 = match &rep.p0 {
        InitialFrequencies::Uniform => vec![1.0 / m as f64; m],
        InitialFrequencies::Random => random_simplex(m, seed),
        InitialFrequencies::Given(p) => p.clone(),
    };
    replicator::integrate_replicator(&p0, &a, rep.t_end, rep.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn random_frequencies_follow_the_seed() {
        let a = random_simplex(5, 7);
        assert_eq!(a, random_simplex(5, 7));
        assert_ne!(a, random_simplex(5, 8));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15 && a.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn short_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("grid.n = 41\ninit.mass = 0.5\nsolver.t_end = 0.05\nsolver.snapshot_stride = 5\noutput.dir = {}\n", dir.path().display());
        let config = parse_config(&text).unwrap();
        let (code, report) = run_experiment(&config);
        let report = report.unwrap();
        assert_eq!(code, report.exit_code);
        for f in ["trace.csv", "snapshots.ndjson", "diagnostics.csv", "summary.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("blowup.csv").exists());
        let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["outcome"], "RanToEnd");
        assert!((summary["initial_mass"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn module_errors_exit_with_one() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("grid.n = 41\ninit.kind = constructed\ninit.mollify_radius = 0.4\noutput.dir = {}\n", dir.path().display());
        let config = parse_config(&text).unwrap();
        let (code, report) = run_experiment(&config);
        assert_eq!(code, EXIT_ERROR);
        assert!(report.is_err());
        assert!(!dir.path().join("trace.csv").exists());
    }

    #[test]
    fn replicator_config_runs() {
        let c = parse_config("replicator.payoff = identity\nreplicator.p0 = 0.6 0.4\nreplicator.t_end = 1\n").unwrap();
        let tr = run_replicator(c.replicator.as_ref().unwrap(), c.seed).unwrap();
        assert_eq!(tr.times.len(), 101);
        assert!(tr.states.last().unwrap()[0] > 0.6);
    }
}
