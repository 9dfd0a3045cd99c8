use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn replidyn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_replidyn")).args(args).current_dir(dir).env_remove("REPLIDYN_OUT").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const BLOWUP_RUN: &str = "grid.n = 101\ninit.mass = 1.5\nsolver.scheme = midpoint\nsolver.dt_max = 2e-4\n\
solver.reaction_dt_factor = 0.05\nsolver.snapshot_stride = 1\noutput.dir = out\n";

#[test]
fn run_writes_artifacts_and_verify_rechecks_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", BLOWUP_RUN);
    let out = replidyn(&["run", "--config", &cfg], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.starts_with("outcome BlowUp"), "{stdout}");
    for f in ["trace.csv", "snapshots.ndjson", "diagnostics.csv", "blowup.csv", "summary.json"] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "BlowUp");
    assert_eq!(summary["checks_failed"], 0);

    let (trace, snaps) = ("out/trace.csv", "out/snapshots.ndjson");
    let v = replidyn(&["verify", "--trace", trace, "--snapshots", snaps, "--config", &cfg, "--checks", "comparison,phi_norm"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    let text = String::from_utf8(v.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("check,t,value,bound,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",true") && (r.starts_with("comparison") || r.starts_with("phi_norm"))));

    let b = replidyn(&["blowup", "--trace", trace, "--snapshots", snaps, "--config", &cfg], dir.path());
    assert_eq!(b.status.code(), Some(0));
    let text = String::from_utf8(b.stdout).unwrap();
    assert!(text.starts_with("metric,value\nt_max_estimate,"), "{text}");
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "grid.n = 101\nsolver.tend = 1\n");
    let out = replidyn(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("line 2") && err.contains("solver.tend"), "{err}");
    assert_eq!(replidyn(&["run", "--config", "missing.cfg"], dir.path()).status.code(), Some(1));
}

#[test]
fn failing_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", &format!("{BLOWUP_RUN}diagnostics.mass_ode_tol = 1e-12\n"));
    let out = replidyn(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mass_sweep_separates_the_three_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.cfg",
        "grid.n = 101\nsolver.scheme = midpoint\nsolver.precision = double-double\nsolver.t_end = 5\nsolver.dt_max = 2e-3\n\
         solver.reaction_dt_factor = 0.05\ndiagnostics.enabled = false\nsweep.axis = initial_mass\nsweep.values = 0.5 1 1.5\noutput.dir = sweep\n",
    );
    let out = replidyn(&["sweep", "--config", &cfg, "--parallelism", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("sweep/sweep_summary.csv")).unwrap();
    let outcomes: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(outcomes, ["Decayed", "RanToEnd", "BlowUp"], "{summary}");
    let last: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep/run_002/summary.json")).unwrap()).unwrap();
    assert!(last["t_max_estimate"].as_f64().unwrap() > 0.0);
    assert!(last["blowup_note"].as_str().unwrap().contains("snapshots"));
}

#[test]
fn replicator_and_initdata_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rep.cfg", "replicator.payoff = identity\nreplicator.m = 3\nreplicator.p0 = random\nseed = 7\noutput.dir = rep\n");
    let out = replidyn(&["replicator", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("rep/replicator.csv")).unwrap();
    assert!(text.starts_with("t,p_1,p_2,p_3\n"));
    let again = replidyn(&["replicator", "--config", &cfg], dir.path());
    assert_eq!(again.stdout, out.stdout);

    let cfg = write(dir.path(), "init.cfg", "grid.n = 201\ninit.mass = 0.5\noutput.dir = init\n");
    let out = replidyn(&["initdata", "--config", &cfg], dir.path());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.starts_with("property,measured,threshold,pass\n"), "{report}");
    assert!(dir.path().join("init/initdata.ndjson").exists());
    let failed = report.lines().skip(1).any(|l| l.ends_with(",false"));
    assert_eq!(out.status.code(), Some(if failed { 2 } else { 0 }));
}
