//! On-disk formats. Every writer renders to memory first and then renames a
//! temporary file into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::CheckRow;
use crate::error::{Error, Result};
use crate::initdata::PropertyCheck;
use crate::mesh::Grid;
use crate::trace::{Snapshot, Trace, TraceRow};

/// Above this many strategies the replicator trace is written as NDJSON.
pub const MAX_CSV_STRATEGIES: usize = 64;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().ok_or_else(|| Error::Precondition(format!("`{}` is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes<R: Serialize>(header: Option<&[&str]>, rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Columns `t,dt,mass,dirichlet_energy,sup_norm,phi_norm,rho_eps_value,floored_nodes`.
pub fn trace_csv(trace: &Trace) -> Result<Vec<u8>> {
    csv_bytes(None, &trace.rows)
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    write_atomic(path, &trace_csv(trace)?)
}

/// Rows only; the caller supplies ε, |Ω| and the cap.
pub fn read_trace(path: &Path, epsilon: f64, measure: f64, sup_cap: f64) -> Result<Trace> {
    let mut r = csv::Reader::from_path(path)?;
    let mut trace = Trace::new(epsilon, measure, sup_cap);
    for row in r.deserialize::<TraceRow>() {
        trace.rows.push(row?);
    }
    trace.validate()?;
    Ok(trace)
}

#[derive(Serialize, Deserialize)]
struct SnapshotRecord {
    t: f64,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// One `{"t", "shape", "values"}` record per line, values row-major.
pub fn snapshots_ndjson(grid: &Grid, snapshots: &[Snapshot]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in snapshots {
        grid.check_len(&s.values)?;
        let rec = SnapshotRecord { t: s.t, shape: grid.counts().to_vec(), values: s.values.clone() };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_snapshots(path: &Path, grid: &Grid, snapshots: &[Snapshot]) -> Result<()> {
    write_atomic(path, &snapshots_ndjson(grid, snapshots)?)
}

/// Snapshots and the node counts per axis (x first) recorded with them.
pub fn read_snapshots(path: &Path) -> Result<(Vec<Snapshot>, Vec<usize>)> {
    let text = fs::read_to_string(path)?;
    let mut snaps = Vec::new();
    let mut shape: Option<Vec<usize>> = None;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: SnapshotRecord = serde_json::from_str(line).map_err(|e| Error::Parse(format!("snapshot line {}: {e}", k + 1)))?;
        if rec.shape.iter().product::<usize>() != rec.values.len() {
            return Err(Error::Parse(format!("snapshot line {}: shape {:?} does not match {} values", k + 1, rec.shape, rec.values.len())));
        }
        match &shape {
            Some(s) if *s != rec.shape => return Err(Error::Parse(format!("snapshot line {}: shape changes to {:?}", k + 1, rec.shape))),
            _ => shape = Some(rec.shape.clone()),
        }
        snaps.push(Snapshot { t: rec.t, values: rec.values });
    }
    let counts = shape.ok_or_else(|| Error::Parse(format!("`{}` holds no snapshots", path.display())))?;
    Ok((snaps, counts))
}

pub fn checks_csv(rows: &[CheckRow]) -> Result<Vec<u8>> {
    csv_bytes(Some(&["check", "t", "value", "bound", "pass"]), rows.iter().map(|r| (&r.check, r.t, r.value, r.bound, r.pass)))
}

pub fn properties_csv(rows: &[PropertyCheck]) -> Result<Vec<u8>> {
    csv_bytes(Some(&["property", "measured", "threshold", "pass"]), rows.iter().map(|r| (r.property, r.measured, r.threshold, r.pass)))
}

pub fn metrics_csv(rows: &[(String, f64)]) -> Result<Vec<u8>> {
    csv_bytes(Some(&["metric", "value"]), rows.iter().map(|(k, v)| (k, v)))
}

/// `t,p_1,...,p_m`, or one `{"t", "p"}` JSON record per line when `m`
/// exceeds [`MAX_CSV_STRATEGIES`].
pub fn replicator_trace_bytes(times: &[f64], states: &[Vec<f64>]) -> Result<(Vec<u8>, &'static str)> {
    let m = states.first().map_or(0, Vec::len);
    if m > MAX_CSV_STRATEGIES {
        let mut out = Vec::new();
        for (t, p) in times.iter().zip(states) {
            serde_json::to_writer(&mut out, &serde_json::json!({ "t": t, "p": p }))?;
            out.push(b'\n');
        }
        return Ok((out, "ndjson"));
    }
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=m).map(|i| format!("p_{i}"))).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (t, p) in times.iter().zip(states) {
        w.serialize((t, p))?;
    }
    Ok((w.into_inner().map_err(|e| Error::Io(e.into_error()))?, "csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> Trace {
        let mut tr = Trace::new(1e-3, 1.0, 62.5);
        for k in 0..4 {
            let t = k as f64 * 0.1;
            tr.rows.push(TraceRow {
                t,
                dt: if k == 0 { 0.0 } else { 0.1 },
                mass: 1.001 + t,
                dirichlet_energy: 12.0 + t / 3.0,
                sup_norm: 1.5,
                phi_norm: 12.0,
                rho_eps_value: 12.0,
                floored_nodes: k,
            });
        }
        tr
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/trace.csv");
        let tr = sample_trace();
        write_trace(&path, &tr).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,dt,mass,dirichlet_energy,sup_norm,phi_norm,rho_eps_value,floored_nodes\n"));
        assert_eq!(read_trace(&path, 1e-3, 1.0, 62.5).unwrap(), tr);
        assert!(!dir.path().join("a/.trace.csv.tmp").exists());
    }

    #[test]
    fn snapshot_round_trip_keeps_shape() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, &[1.0, 2.0], &[3, 4]).unwrap();
        let snaps = vec![Snapshot { t: 0.0, values: (0..12).map(|v| v as f64 / 7.0).collect() }, Snapshot { t: 0.5, values: vec![1.0; 12] }];
        let path = dir.path().join("s.ndjson");
        write_snapshots(&path, &g, &snaps).unwrap();
        let first = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("{\"t\":0.0,\"shape\":[3,4],\"values\":["));
        let (back, counts) = read_snapshots(&path).unwrap();
        assert_eq!(back, snaps);
        assert_eq!(counts, vec![3, 4]);
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ndjson");
        fs::write(&path, "{\"t\":0,\"shape\":[3],\"values\":[1,2]}\n").unwrap();
        assert!(read_snapshots(&path).is_err());
        fs::write(&path, "").unwrap();
        assert!(read_snapshots(&path).is_err());
    }

    #[test]
    fn report_formats() {
        let rows = vec![CheckRow::new("phi_norm", 0.5, 1.0, 2.0, true)];
        assert_eq!(String::from_utf8(checks_csv(&rows).unwrap()).unwrap(), "check,t,value,bound,pass\nphi_norm,0.5,1.0,2.0,true\n");
        let m = metrics_csv(&[("t_max_estimate".into(), 0.25)]).unwrap();
        assert_eq!(String::from_utf8(m).unwrap(), "metric,value\nt_max_estimate,0.25\n");
        let (bytes, kind) = replicator_trace_bytes(&[0.0], &[vec![0.5, 0.5]]).unwrap();
        assert_eq!((String::from_utf8(bytes).unwrap().as_str(), kind), ("t,p_1,p_2\n0.0,0.5,0.5\n", "csv"));
        let (_, kind) = replicator_trace_bytes(&[0.0], &[vec![1.0 / 65.0; 65]]).unwrap();
        assert_eq!(kind, "ndjson");
    }
}
