//! Time stepping for the ε-regularized problem
//! `u_t = u Δu + u ρ_ε(∫|∇u|²)`, `u = ε` on the boundary, `ρ_ε(z) = min(z, 1/ε)`.
//!
//! All schemes are written in increment form `u^{n+1} = u^n + δ` so that a
//! steady state is reproduced to the roundoff of the increment, not of `u`.

use std::str::FromStr;

use crate::blowup;
use crate::elliptic::{pcg, phi_weighted_sup, solve_torsion, TorsionSolution};
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::real::{Precision, Real};
use crate::trace::{Snapshot, Trace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Explicit,
    /// Frozen coefficient `u^n` in `u Δu`, nonlocal term at level n.
    #[default]
    SemiImplicit,
    /// Second-order variant: half-step predictor, then a Crank–Nicolson
    /// corrector with coefficient and nonlocal term frozen at the predictor.
    Midpoint,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::SemiImplicit => "semi-implicit",
            Scheme::Midpoint => "midpoint",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "semi-implicit" => Ok(Scheme::SemiImplicit),
            "midpoint" => Ok(Scheme::Midpoint),
            other => Err(format!("unknown scheme `{other}` (expected explicit | semi-implicit | midpoint)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub epsilon: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_c: f64,
    pub t_end: f64,
    /// `None` selects [`default_sup_cap`].
    pub sup_cap: Option<f64>,
    pub scheme: Scheme,
    pub snapshot_stride: usize,
    pub trace_stride: usize,
    pub precision: Precision,
    /// dt ≤ reaction_dt_factor / max(ρ_ε, 1).
    pub reaction_dt_factor: f64,
    /// Decayed when final corrected mass < decay_threshold · initial.
    pub decay_threshold: f64,
    pub max_steps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            epsilon: 1e-3,
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            cfl_c: 0.9,
            t_end: 1.0,
            sup_cap: None,
            scheme: Scheme::SemiImplicit,
            snapshot_stride: 100,
            trace_stride: 1,
            precision: Precision::F64,
            reaction_dt_factor: 0.5,
            decay_threshold: 0.05,
            max_steps: 50_000_000,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.cfl_c > 0.0 && self.cfl_c <= 1.0) {
            return bad(format!("cfl_c must lie in (0, 1], got {}", self.cfl_c));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if let Some(cap) = self.sup_cap {
            if !(cap > self.epsilon) {
                return bad(format!("sup_cap must exceed epsilon, got {cap}"));
            }
        }
        if self.snapshot_stride == 0 || self.trace_stride == 0 {
            return bad("strides must be at least 1".into());
        }
        if !(self.reaction_dt_factor > 0.0) {
            return bad(format!("reaction_dt_factor must be positive, got {}", self.reaction_dt_factor));
        }
        if !(self.decay_threshold > 0.0 && self.decay_threshold < 1.0) {
            return bad(format!("decay_threshold must lie in (0, 1), got {}", self.decay_threshold));
        }
        Ok(())
    }
}

/// `min(z, 1/ε)`.
pub fn rho_eps(z: f64, epsilon: f64) -> Result<f64> {
    if z < 0.0 || z.is_nan() {
        return Err(Error::Precondition(format!("rho_eps needs z >= 0, got {z}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("rho_eps needs epsilon > 0, got {epsilon}")));
    }
    Ok(z.min(1.0 / epsilon))
}

fn rho<T: Real>(z: T, epsilon: T) -> T {
    z.min(T::one() / epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T = f64> {
    pub t: f64,
    pub u: Field<T>,
    /// Step size to attempt next.
    pub dt: f64,
    pub energy: T,
    pub rho_value: T,
}

impl<T: Real> SolverState<T> {
    /// Checks the floor and boundary invariants and evaluates the energy.
    pub fn new(grid: &Grid, u: Field<T>, params: &SolverParams) -> Result<Self> {
        grid.check_len(&u.values)?;
        let eps = T::of(params.epsilon);
        let slack = T::of(1e-12);
        for (k, &v) in u.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node: k });
            }
            if v < eps - slack {
                return Err(Error::Precondition(format!("initial value at node {k} is below epsilon")));
            }
            if grid.is_boundary(k) && (v - eps).abs() > slack {
                return Err(Error::Precondition(format!("initial boundary value at node {k} differs from epsilon")));
            }
        }
        let mut u = u;
        for k in 0..grid.len() {
            if grid.is_boundary(k) {
                u.values[k] = eps;
            } else if u.values[k] < eps {
                u.values[k] = eps;
            }
        }
        let energy = grid.dirichlet_energy(&u, eps);
        Ok(SolverState { t: 0.0, u, dt: params.dt_init, energy, rho_value: rho(energy, eps) })
    }

    pub fn sup_norm(&self) -> T {
        self.u.sup_norm()
    }
}

#[derive(Debug, Clone)]
pub struct StepResult<T> {
    pub state: SolverState<T>,
    /// Interior nodes raised to ε by the floor in the accepted step.
    pub floored: usize,
    pub rejections: usize,
    /// The sup-norm test could not be met with dt ≥ dt_min.
    pub starved: bool,
    pub sup_increasing: bool,
}

/// Largest step the explicit limits allow for `state`.
pub fn admissible_dt<T: Real>(grid: &Grid, state: &SolverState<T>, params: &SolverParams) -> f64 {
    let mut dt = state.dt.min(params.dt_max);
    dt = dt.min(params.reaction_dt_factor / state.rho_value.to_f64_lossy().max(1.0));
    if params.scheme == Scheme::Explicit {
        let h = grid.min_spacing();
        let umax = state.u.max().to_f64_lossy();
        dt = dt.min(params.cfl_c * h * h / (2.0 * grid.dimension() as f64 * umax));
    }
    dt
}

/// One adaptive step: halve dt while the relative sup-norm change exceeds
/// 10%, grow the next dt by 1.2 when it stays below 1%.
pub fn step<T: Real>(grid: &Grid, state: &SolverState<T>, params: &SolverParams) -> Result<StepResult<T>> {
    let mut dt = admissible_dt(grid, state, params);
    let sup0 = state.sup_norm().to_f64_lossy();
    let mut rejections = 0;
    loop {
        let (u, floored) = advance(grid, state, params, dt)?;
        let sup1 = u.sup_norm().to_f64_lossy();
        let change = (sup1 - sup0).abs() / sup0;
        if !u.is_finite() || change > 0.1 {
            if dt * 0.5 < params.dt_min {
                let eps = T::of(params.epsilon);
                let energy = grid.dirichlet_energy(&u, eps);
                return Ok(StepResult {
                    state: SolverState { t: state.t + dt, u, dt, energy, rho_value: rho(energy, eps) },
                    floored,
                    rejections,
                    starved: true,
                    sup_increasing: !(sup1 <= sup0),
                });
            }
            dt *= 0.5;
            rejections += 1;
            continue;
        }
        let next = if change < 0.01 { dt * 1.2 } else { dt };
        let eps = T::of(params.epsilon);
        let energy = grid.dirichlet_energy(&u, eps);
        return Ok(StepResult {
            state: SolverState { t: state.t + dt, u, dt: next.min(params.dt_max), energy, rho_value: rho(energy, eps) },
            floored,
            rejections,
            starved: false,
            sup_increasing: sup1 > sup0,
        });
    }
}

/// Candidate state after one step of size `dt`, floored at ε; returns the
/// number of floored interior nodes.
pub fn advance<T: Real>(grid: &Grid, state: &SolverState<T>, params: &SolverParams, dt: f64) -> Result<(Field<T>, usize)> {
    let n = grid.len();
    let eps = T::of(params.epsilon);
    let u = &state.u.values;
    let mut lap = vec![T::zero(); n];
    grid.laplacian_into(u, eps, &mut lap);
    let reaction = |k: usize, base: &[T], r: T| base[k] * (lap[k] + r);

    let delta: Vec<T> = match params.scheme {
        Scheme::Explicit => {
            let dtt = T::of(dt);
            (0..n)
                .map(|k| if grid.is_boundary(k) { T::zero() } else { dtt * reaction(k, u, state.rho_value) })
                .collect()
        }
        Scheme::SemiImplicit => {
            let dtt = T::of(dt);
            let rhs: Vec<T> = (0..n)
                .map(|k| if grid.is_boundary(k) { T::zero() } else { dtt * reaction(k, u, state.rho_value) })
                .collect();
            shifted_solve(grid, u, dtt, &rhs)?
        }
        Scheme::Midpoint => {
            let half = T::of(0.5 * dt);
            let rhs: Vec<T> = (0..n)
                .map(|k| if grid.is_boundary(k) { T::zero() } else { half * reaction(k, u, state.rho_value) })
                .collect();
            let d1 = shifted_solve(grid, u, half, &rhs)?;
            let mid: Vec<T> = (0..n)
                .map(|k| if grid.is_boundary(k) { eps } else { (u[k] + d1[k]).max(eps) })
                .collect();
            let mid = Field::new(mid);
            let rho_mid = rho(grid.dirichlet_energy(&mid, eps), eps);
            let dtt = T::of(dt);
            let rhs: Vec<T> = (0..n)
                .map(|k| if grid.is_boundary(k) { T::zero() } else { dtt * reaction(k, &mid.values, rho_mid) })
                .collect();
            shifted_solve(grid, &mid.values, half, &rhs)?
        }
    };

    let mut floored = 0;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if grid.is_boundary(k) {
            out.push(eps);
            continue;
        }
        let v = u[k] + delta[k];
        if v < eps {
            floored += 1;
            out.push(eps);
        } else {
            out.push(v);
        }
    }
    Ok((Field::new(out), floored))
}

/// Solves `δ − a·d·Δ_h δ = rhs` on interior nodes with `δ = 0` on the boundary.
fn shifted_solve<T: Real>(grid: &Grid, d: &[T], a: T, rhs: &[T]) -> Result<Vec<T>> {
    let n = grid.len();
    if grid.dimension() == 1 {
        let h = grid.spacing_in::<T>()[0];
        let c = a / (h * h);
        // Thomas algorithm on nodes 1..n-1.
        let m = n - 2;
        let mut cp = vec![T::zero(); m];
        let mut dp = vec![T::zero(); m];
        for i in 0..m {
            let k = i + 1;
            let off = -c * d[k];
            let diag = T::one() + T::of(2.0) * c * d[k];
            let denom = if i == 0 { diag } else { diag - off * cp[i - 1] };
            cp[i] = off / denom;
            dp[i] = if i == 0 { rhs[k] / denom } else { (rhs[k] - off * dp[i - 1]) / denom };
        }
        let mut x = vec![T::zero(); n];
        for i in (0..m).rev() {
            x[i + 1] = if i + 1 == m { dp[i] } else { dp[i] - cp[i] * x[i + 2] };
        }
        return Ok(x);
    }
    // Symmetric form (d⁻¹ − aΔ)δ = d⁻¹ rhs.
    let inv_d: Vec<T> = (0..n).map(|k| if grid.is_boundary(k) { T::one() } else { T::one() / d[k] }).collect();
    let diag_lap: f64 = grid.stencil().iter().map(|&(_, c)| 2.0 * c).sum();
    let precond: Vec<T> = (0..n)
        .map(|k| if grid.is_boundary(k) { T::one() } else { T::one() / (inv_d[k] + a * T::of(diag_lap)) })
        .collect();
    let b: Vec<T> = (0..n).map(|k| if grid.is_boundary(k) { T::zero() } else { rhs[k] * inv_d[k] }).collect();
    let scratch = std::cell::RefCell::new(vec![T::zero(); n]);
    let mut x = vec![T::zero(); n];
    let tol = (1e3 * T::EPSILON).max(1e-30);
    pcg(
        |v, out| {
            let mut l = scratch.borrow_mut();
            grid.laplacian_into(v, T::zero(), &mut l);
            for k in 0..n {
                out[k] = if grid.is_boundary(k) { v[k] } else { inv_d[k] * v[k] - a * l[k] };
            }
        },
        &precond,
        &b,
        &mut x,
        tol,
        10 * n,
    )?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Decayed,
    RanToEnd,
    BlowUp {
        /// Root of the 1/(y−1) extrapolation; `None` when the tail has no
        /// blow-up signature.
        t_max_estimate: Option<f64>,
        t_last: f64,
        /// Ended by dt starvation rather than by the sup cap.
        starved: bool,
    },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Decayed => "Decayed",
            Outcome::RanToEnd => "RanToEnd",
            Outcome::BlowUp { .. } => "BlowUp",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::BlowUp { .. })
    }

    pub fn t_max_estimate(&self) -> Option<f64> {
        match self {
            Outcome::BlowUp { t_max_estimate, .. } => *t_max_estimate,
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub outcome: Outcome,
    pub trace: Trace,
    pub snapshots: Vec<Snapshot>,
    pub params: SolverParams,
    /// Cap actually enforced (explicit or defaulted).
    pub sup_cap: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Largest fraction of interior nodes floored in a single step.
    pub max_floor_fraction: f64,
    /// More than 0.1% of interior nodes were floored in some step.
    pub floor_flagged: bool,
    pub final_u: Field<f64>,
}

/// Blow-up threshold used when none is configured:
/// `min(1e4·‖u0‖_∞, ½·(ε + max(1/ε, ‖u0 − ε‖_Φ)·max Φ))`.
///
/// The second term is half the a-priori sup bound of the regularized problem;
/// a cap above that bound could never be reached.
pub fn default_sup_cap<T: Real>(u0: &Field<T>, torsion: &TorsionSolution, epsilon: f64) -> f64 {
    let u0f = u0.to_f64();
    let shifted = u0f.map(|v| v - epsilon);
    let phi_norm = phi_weighted_sup(&shifted, torsion);
    let bound = epsilon + (1.0 / epsilon).max(phi_norm) * torsion.max_phi();
    (1e4 * u0f.sup_norm()).min(0.5 * bound)
}

/// `e^{B+1}·(M + max Φ)`: a-priori sup bound of a run whose data stays below
/// `M` and whose time-integrated energy stays below `B`.
pub fn comparison_upper_bound(m: f64, b: f64, torsion: &TorsionSolution) -> Result<f64> {
    if !(m > 0.0) || !(b >= 0.0) {
        return Err(Error::Precondition(format!("comparison bound needs M > 0 and B >= 0, got {m}, {b}")));
    }
    Ok((b + 1.0).exp() * (m + torsion.max_phi()))
}

fn trace_row<T: Real>(grid: &Grid, state: &SolverState<T>, torsion: &TorsionSolution, eps: f64, dt: f64, floored: usize) -> Result<TraceRow> {
    let mass = grid.integrate(&state.u)?.to_f64_lossy();
    let uf = state.u.to_f64();
    let phi_norm = phi_weighted_sup(&uf.map(|v| v - eps), torsion);
    Ok(TraceRow {
        t: state.t,
        dt,
        mass,
        dirichlet_energy: state.energy.to_f64_lossy(),
        sup_norm: uf.sup_norm(),
        phi_norm,
        rho_eps_value: state.rho_value.to_f64_lossy(),
        floored_nodes: floored,
    })
}

/// Integrates from `u0` until `t_end`, the sup cap, or dt starvation.
pub fn run<T: Real>(grid: &Grid, u0: Field<T>, params: &SolverParams) -> Result<SimulationResult> {
    params.validate()?;
    let torsion = solve_torsion(grid)?;
    let eps = params.epsilon;
    let sup_cap = params.sup_cap.unwrap_or_else(|| default_sup_cap(&u0, &torsion, eps));
    let mut state = SolverState::new(grid, u0, params)?;
    let mut trace = Trace::new(eps, grid.measure(), sup_cap);
    let mut snapshots = Vec::new();
    trace.rows.push(trace_row(grid, &state, &torsion, eps, 0.0, 0)?);
    snapshots.push(Snapshot { t: 0.0, values: state.u.to_f64().values });

    let interior = grid.interior().count().max(1) as f64;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut max_floor_fraction: f64 = 0.0;
    let mut blowup: Option<bool> = None;
    let mut last_dt = 0.0;
    let mut last_floored = 0;
    let mut row_written = true;
    let mut snap_written = true;
    let t_tol = 1e-12 * params.t_end;

    while state.t < params.t_end - t_tol {
        if steps >= params.max_steps {
            return Err(Error::StepBudget(params.max_steps));
        }
        state.dt = state.dt.min(params.t_end - state.t);
        let res = step(grid, &state, params)?;
        rejected += res.rejections;
        if res.starved && res.sup_increasing {
            blowup = Some(true);
            break;
        }
        last_dt = res.state.t - state.t;
        last_floored = res.floored;
        state = res.state;
        steps += 1;
        max_floor_fraction = max_floor_fraction.max(res.floored as f64 / interior);
        if !state.u.is_finite() {
            let node = state.u.values.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite { node });
        }
        row_written = steps % params.trace_stride == 0;
        if row_written {
            trace.rows.push(trace_row(grid, &state, &torsion, eps, last_dt, last_floored)?);
        }
        snap_written = steps % params.snapshot_stride == 0;
        if snap_written {
            snapshots.push(Snapshot { t: state.t, values: state.u.to_f64().values });
        }
        if state.sup_norm().to_f64_lossy() >= sup_cap {
            blowup = Some(false);
            break;
        }
    }
    if !row_written {
        trace.rows.push(trace_row(grid, &state, &torsion, eps, last_dt, last_floored)?);
    }
    if !snap_written {
        snapshots.push(Snapshot { t: state.t, values: state.u.to_f64().values });
    }

    let outcome = match blowup {
        Some(starved) => {
            let t_max_estimate = blowup::estimate_tmax(&trace).ok().map(|fit| fit.t_max);
            Outcome::BlowUp { t_max_estimate, t_last: state.t, starved }
        }
        None => {
            let first = trace.corrected_mass(0);
            let last = trace.corrected_mass(trace.len() - 1);
            if last < params.decay_threshold * first {
                Outcome::Decayed
            } else {
                Outcome::RanToEnd
            }
        }
    };
    Ok(SimulationResult {
        outcome,
        trace,
        snapshots,
        params: params.clone(),
        sup_cap,
        steps,
        rejected_steps: rejected,
        max_floor_fraction,
        floor_flagged: max_floor_fraction > 1e-3,
        final_u: state.u.to_f64(),
    })
}

/// Runs `u0` in the precision named by `params.precision`.
pub fn run_with_precision(grid: &Grid, u0: &Field<f64>, params: &SolverParams) -> Result<SimulationResult> {
    match params.precision {
        Precision::F64 => run(grid, u0.clone(), params),
        Precision::DoubleDouble => run(grid, u0.cast::<crate::real::DoubleDouble>(), params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::torsion_profile;
    use proptest::prelude::*;

    #[test]
    fn rho_eps_examples() {
        assert_eq!(rho_eps(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(rho_eps(3.0, 0.5).unwrap(), 2.0);
        assert_eq!(rho_eps(0.0, 0.1).unwrap(), 0.0);
        assert!(rho_eps(-1.0, 0.1).is_err());
        assert!(rho_eps(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn rho_eps_is_monotone_and_lipschitz(a in 0.0f64..100.0, b in 0.0f64..100.0, eps in 1e-3f64..1.0) {
            let (ra, rb) = (rho_eps(a, eps).unwrap(), rho_eps(b, eps).unwrap());
            prop_assert!((ra - rb).abs() <= (a - b).abs());
            if a <= b {
                prop_assert!(ra <= rb);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        let bad = SolverParams { dt_init: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverParams { cfl_c: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!("midpoint".parse::<Scheme>().unwrap(), Scheme::Midpoint);
        assert!("rk4".parse::<Scheme>().is_err());
    }

    #[test]
    fn constant_epsilon_is_a_fixed_state() {
        let g = Grid::unit_interval(21).unwrap();
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit, Scheme::Midpoint] {
            let p = SolverParams { scheme, ..Default::default() };
            let s = SolverState::new(&g, Field::constant(&g, p.epsilon), &p).unwrap();
            for dt in [1e-4, 1e-2, 1.0] {
                let (u, floored) = advance(&g, &s, &p, dt).unwrap();
                assert_eq!(floored, 0);
                assert!(u.values.iter().all(|&v| v == p.epsilon));
            }
        }
    }

    #[test]
    fn explicit_step_matches_the_update_formula() {
        let g = Grid::unit_interval(41).unwrap();
        let p = SolverParams { scheme: Scheme::Explicit, ..Default::default() };
        let eps = p.epsilon;
        let u0 = Field::from_fn(&g, |x| eps + 0.01 * (-(x[0] - 0.5).powi(2) / 0.01).exp() * (x[0] * (1.0 - x[0])).min(1.0));
        let mut u0 = u0;
        u0.values[0] = eps;
        u0.values[40] = eps;
        let s = SolverState::new(&g, u0.clone(), &p).unwrap();
        let dt = 1e-5;
        let (u1, _) = advance(&g, &s, &p, dt).unwrap();
        let lap = g.laplacian(&u0, eps);
        let r = rho_eps(g.dirichlet_energy(&u0, eps), eps).unwrap();
        for k in g.interior() {
            let expect = u0.values[k] + dt * (u0.values[k] * lap.values[k] + u0.values[k] * r);
            assert!((u1.values[k] - expect).abs() <= 1e-15 * expect.abs(), "node {k}");
        }
        assert_eq!(u1.values[0], eps);
    }

    #[test]
    fn supercritical_energy_increases() {
        let g = Grid::unit_interval(201).unwrap();
        let p = SolverParams::default();
        let mut s = SolverState::new(&g, torsion_profile::<f64>(&g, p.epsilon, 1.5).unwrap(), &p).unwrap();
        for _ in 0..10 {
            let next = step(&g, &s, &p).unwrap().state;
            assert!(next.energy > s.energy);
            s = next;
        }
    }

    #[test]
    fn comparison_bound_examples() {
        let g = Grid::unit_interval(201).unwrap();
        let torsion = solve_torsion(&g).unwrap();
        let b = comparison_upper_bound(1.0, 0.0, &torsion).unwrap();
        assert!((b - std::f64::consts::E * 1.125).abs() < 1e-9);
        assert!(comparison_upper_bound(2.0, 0.0, &torsion).unwrap() > b);
        assert!(comparison_upper_bound(1.0, 0.5, &torsion).unwrap() > b);
        assert!(comparison_upper_bound(0.0, 0.5, &torsion).is_err());
        assert!(comparison_upper_bound(1.0, -0.5, &torsion).is_err());
    }

    #[test]
    fn decayed_run_stays_below_comparison_bound() {
        let g = Grid::unit_interval(51).unwrap();
        let p = SolverParams { t_end: 20.0, dt_max: 1e-2, ..Default::default() };
        let u0 = torsion_profile::<f64>(&g, p.epsilon, 0.5).unwrap();
        let r = run(&g, u0.clone(), &p).unwrap();
        assert_eq!(r.outcome, Outcome::Decayed);
        let torsion = solve_torsion(&g).unwrap();
        let mut b = 0.0;
        for w in r.trace.rows.windows(2) {
            b += 0.5 * (w[0].dirichlet_energy + w[1].dirichlet_energy) * (w[1].t - w[0].t);
        }
        let bound = comparison_upper_bound(u0.max(), b, &torsion).unwrap();
        assert!(r.trace.rows.iter().all(|row| row.sup_norm <= bound + 1e-6));
    }

    #[test]
    fn run_records_first_and_last_rows() {
        let g = Grid::unit_interval(21).unwrap();
        let p = SolverParams { t_end: 0.05, snapshot_stride: 7, trace_stride: 3, ..Default::default() };
        let r = run(&g, torsion_profile::<f64>(&g, p.epsilon, 1.0).unwrap(), &p).unwrap();
        assert_eq!(r.trace.rows[0].t, 0.0);
        assert!((r.trace.rows.last().unwrap().t - 0.05).abs() < 1e-12);
        assert!((r.snapshots.last().unwrap().t - 0.05).abs() < 1e-12);
        r.trace.validate().unwrap();
    }

    #[test]
    fn blowup_is_detected_at_the_cap() {
        let g = Grid::unit_interval(51).unwrap();
        let p = SolverParams { t_end: 1.0, dt_max: 1e-4, ..Default::default() };
        let r = run(&g, torsion_profile::<f64>(&g, p.epsilon, 1.5).unwrap(), &p).unwrap();
        assert!(r.outcome.is_blowup());
        assert!(r.trace.rows.last().unwrap().sup_norm >= r.sup_cap);
        assert!(r.outcome.t_max_estimate().is_some());
    }

    #[test]
    fn runs_are_deterministic() {
        let g = Grid::new(2, &[1.0, 1.0], &[17, 17]).unwrap();
        let p = SolverParams { t_end: 0.02, ..Default::default() };
        let u0 = torsion_profile::<f64>(&g, p.epsilon, 1.2).unwrap();
        let a = run(&g, u0.clone(), &p).unwrap();
        let b = run(&g, u0, &p).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn rejects_data_below_the_floor() {
        let g = Grid::unit_interval(11).unwrap();
        let p = SolverParams::default();
        assert!(SolverState::new(&g, Field::constant(&g, 0.0), &p).is_err());
        let mut u = Field::constant(&g, 0.5);
        u.values[0] = p.epsilon;
        assert!(SolverState::new(&g, u, &p).is_err());
    }
}
