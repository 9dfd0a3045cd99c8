//! Flat `section.key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are whitespace separated.
//! Every key not set falls back to the default listed in [`KEYS`].

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::real::Precision;
use crate::solver::{Scheme, SolverParams};

/// Accepted keys with their defaults, as documented in the README.
pub const KEYS: &[(&str, &str)] = &[
    ("grid.dimension", "1"),
    ("grid.extents", "1 per axis"),
    ("grid.n", "201 per axis"),
    ("init.kind", "torsion"),
    ("init.mass", "1"),
    ("init.mollify_radius", "one grid spacing"),
    ("init.margin_theta", "0.25"),
    ("init.margin_rho", "three grid spacings"),
    ("solver.epsilon", "1e-3"),
    ("solver.dt_init", "1e-4"),
    ("solver.dt_min", "1e-12"),
    ("solver.dt_max", "1e-2"),
    ("solver.cfl_c", "0.9"),
    ("solver.t_end", "1"),
    ("solver.sup_cap", "derived from the initial data"),
    ("solver.scheme", "semi-implicit"),
    ("solver.precision", "f64"),
    ("solver.snapshot_stride", "100"),
    ("solver.trace_stride", "1"),
    ("solver.reaction_dt_factor", "0.5"),
    ("solver.decay_threshold", "0.05"),
    ("solver.max_steps", "50000000"),
    ("diagnostics.enabled", "true"),
    ("diagnostics.mass_ode_tol", "0.05"),
    ("diagnostics.h_identity_tol", "0.05"),
    ("diagnostics.phi_tol", "0.05"),
    ("diagnostics.gradient_tol", "0.1"),
    ("diagnostics.comparison_tol", "1e-9"),
    ("diagnostics.odi_tol", "1e-6"),
    ("diagnostics.margin", "0.25"),
    ("diagnostics.boundary_q", "0.5"),
    ("diagnostics.growth_threshold", "10"),
    ("diagnostics.weak_form", "true"),
    ("diagnostics.weak_form_tol", "0.05"),
    ("replicator.payoff", "unset (no replicator run)"),
    ("replicator.m", "2"),
    ("replicator.entries", "none"),
    ("replicator.n", "201"),
    ("replicator.sigma", "0.05"),
    ("replicator.p0", "uniform"),
    ("replicator.t_end", "10"),
    ("replicator.dt", "0.01"),
    ("output.dir", "out"),
    ("seed", "0"),
];

const SWEEP_KEYS: &[&str] = &["sweep.axis", "sweep.values", "sweep.parallelism"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// `ε + m·Φ/∫Φ`.
    Torsion,
    /// Mollified, corrected data built from the torsion profile of mass `m`.
    Constructed,
}

impl FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "torsion" => Ok(InitKind::Torsion),
            "constructed" => Ok(InitKind::Constructed),
            other => Err(format!("unknown init kind `{other}` (expected torsion | constructed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dimension: usize,
    pub extents: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dimension, &self.extents, &self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub kind: InitKind,
    /// Corrected mass `∫(u0eps − ε)`.
    pub mass: f64,
    pub mollify_radius: Option<f64>,
    pub margin_theta: f64,
    pub margin_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    pub mass_ode_tol: f64,
    pub h_identity_tol: f64,
    pub phi_tol: f64,
    pub gradient_tol: f64,
    pub comparison_tol: f64,
    pub odi_tol: f64,
    /// Distance of the inner subdomain from the boundary.
    pub margin: f64,
    pub boundary_q: f64,
    pub growth_threshold: f64,
    pub weak_form: bool,
    pub weak_form_tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            enabled: true,
            mass_ode_tol: 0.05,
            h_identity_tol: 0.05,
            phi_tol: 0.05,
            gradient_tol: 0.1,
            comparison_tol: 1e-9,
            odi_tol: 1e-6,
            margin: 0.25,
            boundary_q: 0.5,
            growth_threshold: 10.0,
            weak_form: true,
            weak_form_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffSpec {
    Identity { m: usize },
    Matrix { m: usize, entries: Vec<f64> },
    /// Gaussian kernel payoff on the nodes of `[0, 1]`.
    Kernel { n: usize, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialFrequencies {
    Uniform,
    /// Drawn from the config seed.
    Random,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorConfig {
    pub payoff: PayoffSpec,
    pub p0: InitialFrequencies,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub init: InitConfig,
    pub solver: SolverParams,
    pub diagnostics: DiagnosticsConfig,
    pub replicator: Option<ReplicatorConfig>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    InitialMass,
    Epsilon,
    N,
    DtInit,
    /// The diagnostics subdomain margin.
    Margin,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::InitialMass => "initial_mass",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::N => "n",
            SweepAxis::DtInit => "dt_init",
            SweepAxis::Margin => "margin",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "initial_mass" => Ok(SweepAxis::InitialMass),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "n" => Ok(SweepAxis::N),
            "dt_init" => Ok(SweepAxis::DtInit),
            "margin" => Ok(SweepAxis::Margin),
            other => Err(format!("unknown sweep axis `{other}` (expected initial_mass | epsilon | n | dt_init | margin)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub parallelism: usize,
}

impl SweepSpec {
    /// Config for one sweep point; its output lands in `<base dir>/run_<index>`.
    pub fn config_for(&self, index: usize) -> Result<ExperimentConfig> {
        let v = self.values[index];
        let mut c = self.base.clone();
        match self.axis {
            SweepAxis::InitialMass => c.init.mass = v,
            SweepAxis::Epsilon => c.solver.epsilon = v,
            SweepAxis::N => {
                if !(v >= 2.0 && v.fract() == 0.0) {
                    return Err(Error::Precondition(format!("sweep value {v} is not a node count")));
                }
                c.grid.n = vec![v as usize; c.grid.dimension];
            }
            SweepAxis::DtInit => {
                c.solver.dt_init = v;
                c.solver.dt_max = c.solver.dt_max.max(v);
            }
            SweepAxis::Margin => c.diagnostics.margin = v,
        }
        c.output_dir = self.base.output_dir.join(format!("run_{index:03}"));
        validate(&c, &BTreeMap::new())?;
        Ok(c)
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config { line, key: body.to_string(), message: "expected `key = value`".into() });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(Error::Config { line, key, message: "missing value".into() });
        }
        if let Some(prev) = out.insert(key.clone(), Entry { line, value }) {
            return Err(Error::Config { line, key, message: format!("duplicate key (first set on line {})", prev.line) });
        }
    }
    Ok(out)
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn err(&self, key: &str, message: String) -> Error {
        Error::Config { line: self.entries.get(key).map_or(0, |e| e.line), key: key.to_string(), message }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| self.err(key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split_whitespace()
                .map(|s| s.parse::<T>().map_err(|err| self.err(key, format!("cannot parse `{s}`: {err}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn build(r: &Reader) -> Result<ExperimentConfig> {
    let dimension: usize = r.or("grid.dimension", 1)?;
    if dimension != 1 && dimension != 2 {
        return Err(r.err("grid.dimension", format!("must be 1 or 2, got {dimension}")));
    }
    let per_axis = |key: &str, v: Vec<f64>| -> Result<Vec<f64>> {
        match v.len() {
            1 => Ok(vec![v[0]; dimension]),
            k if k == dimension => Ok(v),
            k => Err(r.err(key, format!("expected 1 or {dimension} values, got {k}"))),
        }
    };
    let extents = per_axis("grid.extents", r.list("grid.extents")?.unwrap_or_else(|| vec![1.0]))?;
    let n_raw: Vec<usize> = r.list("grid.n")?.unwrap_or_else(|| vec![201]);
    let n = per_axis("grid.n", n_raw.iter().map(|&v| v as f64).collect())?.iter().map(|&v| v as usize).collect();

    let d = SolverParams::default();
    let solver = SolverParams {
        epsilon: r.or("solver.epsilon", d.epsilon)?,
        dt_init: r.or("solver.dt_init", d.dt_init)?,
        dt_min: r.or("solver.dt_min", d.dt_min)?,
        dt_max: r.or("solver.dt_max", d.dt_max)?,
        cfl_c: r.or("solver.cfl_c", d.cfl_c)?,
        t_end: r.or("solver.t_end", d.t_end)?,
        sup_cap: r.get("solver.sup_cap")?,
        scheme: r.or::<Scheme>("solver.scheme", d.scheme)?,
        snapshot_stride: r.or("solver.snapshot_stride", d.snapshot_stride)?,
        trace_stride: r.or("solver.trace_stride", d.trace_stride)?,
        precision: r.or::<Precision>("solver.precision", d.precision)?,
        reaction_dt_factor: r.or("solver.reaction_dt_factor", d.reaction_dt_factor)?,
        decay_threshold: r.or("solver.decay_threshold", d.decay_threshold)?,
        max_steps: r.or("solver.max_steps", d.max_steps)?,
    };

    let init = InitConfig {
        kind: r.or("init.kind", InitKind::Torsion)?,
        mass: r.or("init.mass", 1.0)?,
        mollify_radius: r.get("init.mollify_radius")?,
        margin_theta: r.or("init.margin_theta", 0.25)?,
        margin_rho: r.get("init.margin_rho")?,
    };

    let dd = DiagnosticsConfig::default();
    let diagnostics = DiagnosticsConfig {
        enabled: r.or("diagnostics.enabled", dd.enabled)?,
        mass_ode_tol: r.or("diagnostics.mass_ode_tol", dd.mass_ode_tol)?,
        h_identity_tol: r.or("diagnostics.h_identity_tol", dd.h_identity_tol)?,
        phi_tol: r.or("diagnostics.phi_tol", dd.phi_tol)?,
        gradient_tol: r.or("diagnostics.gradient_tol", dd.gradient_tol)?,
        comparison_tol: r.or("diagnostics.comparison_tol", dd.comparison_tol)?,
        odi_tol: r.or("diagnostics.odi_tol", dd.odi_tol)?,
        margin: r.or("diagnostics.margin", dd.margin)?,
        boundary_q: r.or("diagnostics.boundary_q", dd.boundary_q)?,
        growth_threshold: r.or("diagnostics.growth_threshold", dd.growth_threshold)?,
        weak_form: r.or("diagnostics.weak_form", dd.weak_form)?,
        weak_form_tol: r.or("diagnostics.weak_form_tol", dd.weak_form_tol)?,
    };

    let replicator = match r.get::<String>("replicator.payoff")? {
        None => {
            if let Some(k) = r.entries.keys().find(|k| k.starts_with("replicator.")) {
                return Err(r.err(k, "replicator keys need `replicator.payoff`".into()));
            }
            None
        }
        Some(kind) => {
            let payoff = match kind.as_str() {
                "identity" => PayoffSpec::Identity { m: r.or("replicator.m", 2)? },
                "matrix" => {
                    let m: usize = r.or("replicator.m", 2)?;
                    let entries = r.list("replicator.entries")?.ok_or_else(|| r.err("replicator.entries", "required for a matrix payoff".into()))?;
                    if entries.len() != m * m {
                        return Err(r.err("replicator.entries", format!("expected {} entries, got {}", m * m, entries.len())));
                    }
                    PayoffSpec::Matrix { m, entries }
                }
                "kernel" => PayoffSpec::Kernel { n: r.or("replicator.n", 201)?, sigma: r.or("replicator.sigma", 0.05)? },
                other => return Err(r.err("replicator.payoff", format!("unknown payoff `{other}` (expected identity | matrix | kernel)"))),
            };
            let p0 = match r.get::<String>("replicator.p0")?.as_deref() {
                None | Some("uniform") => InitialFrequencies::Uniform,
                Some("random") => InitialFrequencies::Random,
                Some(_) => InitialFrequencies::Given(r.list("replicator.p0")?.unwrap_or_default()),
            };
            Some(ReplicatorConfig { payoff, p0, t_end: r.or("replicator.t_end", 10.0)?, dt: r.or("replicator.dt", 0.01)? })
        }
    };

    Ok(ExperimentConfig {
        grid: GridConfig { dimension, extents, n },
        init,
        solver,
        diagnostics,
        replicator,
        output_dir: r.or("output.dir", PathBuf::from("out"))?,
        seed: r.or("seed", 0)?,
    })
}

fn validate(c: &ExperimentConfig, lines: &BTreeMap<String, usize>) -> Result<()> {
    let fail = |key: &str, message: String| Error::Config { line: lines.get(key).copied().unwrap_or(0), key: key.to_string(), message };
    let grid = c.grid.build().map_err(|e| fail("grid.n", e.to_string()))?;
    if !(c.init.mass > 0.0 && c.init.mass.is_finite()) {
        return Err(fail("init.mass", format!("must be positive, got {}", c.init.mass)));
    }
    if let Some(r) = c.init.mollify_radius {
        if !(r > 0.0) {
            return Err(fail("init.mollify_radius", format!("must be positive, got {r}")));
        }
    }
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    let margin_rho = c.init.margin_rho.unwrap_or(3.0 * h);
    if c.init.kind == InitKind::Constructed && !(c.init.margin_theta > margin_rho && margin_rho > 0.0) {
        return Err(fail("init.margin_theta", format!("must exceed init.margin_rho = {margin_rho}")));
    }
    if let Err(e) = c.solver.validate() {
        let key = match &e {
            Error::Precondition(m) if m.starts_with("epsilon") => "solver.epsilon",
            Error::Precondition(m) if m.contains("dt_min") => "solver.dt_init",
            Error::Precondition(m) if m.starts_with("cfl_c") => "solver.cfl_c",
            Error::Precondition(m) if m.starts_with("t_end") => "solver.t_end",
            Error::Precondition(m) if m.starts_with("sup_cap") => "solver.sup_cap",
            Error::Precondition(m) if m.starts_with("strides") => "solver.snapshot_stride",
            Error::Precondition(m) if m.starts_with("reaction") => "solver.reaction_dt_factor",
            Error::Precondition(m) if m.starts_with("decay") => "solver.decay_threshold",
            _ => "solver",
        };
        return Err(fail(key, e.to_string()));
    }
    let d = &c.diagnostics;
    let positive = [
        ("diagnostics.mass_ode_tol", d.mass_ode_tol),
        ("diagnostics.h_identity_tol", d.h_identity_tol),
        ("diagnostics.phi_tol", d.phi_tol),
        ("diagnostics.gradient_tol", d.gradient_tol),
        ("diagnostics.comparison_tol", d.comparison_tol),
        ("diagnostics.odi_tol", d.odi_tol),
        ("diagnostics.boundary_q", d.boundary_q),
        ("diagnostics.growth_threshold", d.growth_threshold),
        ("diagnostics.weak_form_tol", d.weak_form_tol),
    ];
    for (key, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(fail(key, format!("must be positive, got {v}")));
        }
    }
    if !(d.boundary_q < 1.0) {
        return Err(fail("diagnostics.boundary_q", format!("must lie in (0, 1), got {}", d.boundary_q)));
    }
    let half_width = c.grid.extents.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    if !(d.margin > 0.0 && d.margin < half_width) {
        return Err(fail("diagnostics.margin", format!("must lie in (0, {half_width}), got {}", d.margin)));
    }
    if let Some(rep) = &c.replicator {
        if !(rep.dt > 0.0) {
            return Err(fail("replicator.dt", format!("must be positive, got {}", rep.dt)));
        }
        if !(rep.t_end >= 0.0) {
            return Err(fail("replicator.t_end", format!("must be nonnegative, got {}", rep.t_end)));
        }
        let m = match &rep.payoff {
            PayoffSpec::Identity { m } | PayoffSpec::Matrix { m, .. } => *m,
            PayoffSpec::Kernel { n, sigma } => {
                if *n < 3 || !(*sigma > 0.0) {
                    return Err(fail("replicator.sigma", format!("need n >= 3 and sigma > 0, got {n} and {sigma}")));
                }
                *n
            }
        };
        if m == 0 {
            return Err(fail("replicator.m", "must be at least 1".into()));
        }
        if let InitialFrequencies::Given(p) = &rep.p0 {
            if p.len() != m {
                return Err(fail("replicator.p0", format!("expected {m} frequencies, got {}", p.len())));
            }
            crate::replicator::check_simplex(p).map_err(|e| fail("replicator.p0", e.to_string()))?;
        }
    }
    Ok(())
}

fn check_keys(entries: &BTreeMap<String, Entry>, extra: &[&str]) -> Result<()> {
    for (key, e) in entries {
        if !KEYS.iter().any(|(k, _)| k == key) && !extra.contains(&key.as_str()) {
            return Err(Error::Config { line: e.line, key: key.clone(), message: "unknown key".into() });
        }
    }
    Ok(())
}

fn parse_entries(entries: BTreeMap<String, Entry>) -> Result<ExperimentConfig> {
    let lines = entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
    let config = build(&Reader { entries })?;
    validate(&config, &lines)?;
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let entries = tokenize(text)?;
    check_keys(&entries, &[])?;
    parse_entries(entries)
}

/// Parses a config carrying `sweep.axis`, `sweep.values` and the optional
/// `sweep.parallelism` (default 1).
pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let mut entries = tokenize(text)?;
    check_keys(&entries, SWEEP_KEYS)?;
    let sweep: BTreeMap<String, Entry> =
        SWEEP_KEYS.iter().filter_map(|k| entries.remove(*k).map(|e| (k.to_string(), e))).collect();
    let r = Reader { entries: sweep };
    let axis: SweepAxis = r.get("sweep.axis")?.ok_or_else(|| r.err("sweep.axis", "required".into()))?;
    let values: Vec<f64> = r.list("sweep.values")?.unwrap_or_default();
    if values.is_empty() {
        return Err(r.err("sweep.values", "at least one value is required".into()));
    }
    let parallelism: usize = r.or("sweep.parallelism", 1)?;
    if parallelism == 0 {
        return Err(r.err("sweep.parallelism", "must be at least 1".into()));
    }
    let spec = SweepSpec { base: parse_entries(entries)?, axis, values, parallelism };
    for i in 0..spec.values.len() {
        spec.config_for(i).map_err(|e| r.err("sweep.values", format!("value {}: {e}", spec.values[i])))?;
    }
    Ok(spec)
}
