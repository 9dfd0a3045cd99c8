//! Audits of finished runs against the identities and estimates the limit
//! problem satisfies. Limit-problem statements are evaluated on `u − ε` and
//! on the corrected mass `y − ε|Ω|`.

use crate::elliptic::TorsionSolution;
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::trace::{Snapshot, Trace};

/// One line of the `check,t,value,bound,pass` report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(check: &str, t: f64, value: f64, bound: f64, pass: bool) -> Self {
        CheckRow { check: check.to_string(), t, value, bound, pass }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassOdeResidual {
    pub t: Vec<f64>,
    pub raw_mass: Vec<f64>,
    pub corrected_mass: Vec<f64>,
    /// `|y'_k − (y_k − 1)E_k|` on interior rows; first and last rows are `NaN`.
    pub residual: Vec<f64>,
    pub max_residual: f64,
    pub max_derivative: f64,
    /// `max_residual` over the larger of `max |y'|` and a floor of
    /// `1e-6·max |y E|`, so conservative runs are measured against the
    /// terms that cancel; zero when both vanish.
    pub normalized: f64,
}

/// Residual of `y' = (y − 1)∫|∇u|²` with central differences for `y'`.
pub fn mass_ode_residual(trace: &Trace) -> Result<MassOdeResidual> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::Diagnostic(format!("mass ODE residual needs at least 3 rows, got {n}")));
    }
    let t = trace.times();
    let y = trace.corrected_masses();
    let e = trace.energies();
    let mut residual = vec![f64::NAN; n];
    let mut max_res: f64 = 0.0;
    let mut max_der: f64 = 0.0;
    let mut max_ye: f64 = 0.0;
    for k in 1..n - 1 {
        let der = (y[k + 1] - y[k - 1]) / (t[k + 1] - t[k - 1]);
        let r = (der - (y[k] - 1.0) * e[k]).abs();
        residual[k] = r;
        max_res = max_res.max(r);
        max_der = max_der.max(der.abs());
        max_ye = max_ye.max((y[k] * e[k]).abs());
    }
    let denom = max_der.max(1e-6 * max_ye);
    let normalized = if denom > 0.0 { max_res / denom } else { max_res };
    Ok(MassOdeResidual {
        t,
        raw_mass: trace.rows.iter().map(|r| r.mass).collect(),
        corrected_mass: y,
        residual,
        max_residual: max_res,
        max_derivative: max_der,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HIdentity {
    /// Trapezoid-accumulated `∫_0^t E`.
    pub h: Vec<f64>,
    /// `ln((y_k − 1)/(y_0 − 1))`.
    pub log_ratio: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// `max |H − L| / max |L|`.
    pub relative_error: f64,
}

/// Compares `∫_0^t E` with `ln((y(t) − 1)/(y(0) − 1))` row by row.
pub fn h_identity_check(trace: &Trace) -> Result<HIdentity> {
    if trace.is_empty() {
        return Err(Error::Diagnostic("empty trace".into()));
    }
    let y = trace.corrected_masses();
    if !(y[0] > 1.0) {
        return Err(Error::Precondition(format!(
            "identity only valid for supercritical mass (corrected y(0) = {})",
            y[0]
        )));
    }
    let mut h = vec![0.0; trace.len()];
    for k in 1..trace.len() {
        let (a, b) = (&trace.rows[k - 1], &trace.rows[k]);
        h[k] = h[k - 1] + 0.5 * (a.dirichlet_energy + b.dirichlet_energy) * (b.t - a.t);
    }
    let log_ratio: Vec<f64> = y.iter().map(|&v| ((v - 1.0) / (y[0] - 1.0)).ln()).collect();
    let abs_error: Vec<f64> = h.iter().zip(&log_ratio).map(|(a, b)| (a - b).abs()).collect();
    let max_err = abs_error.iter().cloned().fold(0.0, f64::max);
    let max_l = log_ratio.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(HIdentity { h, log_ratio, abs_error, relative_error: if max_l > 0.0 { max_err / max_l } else { max_err } })
}

/// Per row: `‖u − ε‖_Φ ≤ max(‖u_0 − ε‖_Φ, max_{τ≤t} E)·(1 + tol)`.
pub fn phi_norm_bound_check(trace: &Trace, tol: f64) -> Vec<CheckRow> {
    let mut running = 0.0f64;
    let phi0 = trace.rows.first().map(|r| r.phi_norm).unwrap_or(0.0);
    trace
        .rows
        .iter()
        .map(|r| {
            running = running.max(r.dirichlet_energy);
            let bound = phi0.max(running);
            CheckRow::new("phi_norm_bound", r.t, r.phi_norm, bound, r.phi_norm <= bound * (1.0 + tol))
        })
        .collect()
}

/// `∫_{Ω'} f` with trapezoid weights of the torsion solution's own box.
pub fn subdomain_integral(grid: &Grid, torsion: &TorsionSolution, f: impl Fn(usize) -> f64) -> f64 {
    let h = grid.spacing();
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let m = grid.multi_index(k);
        let mut w = 1.0;
        let mut inside = true;
        for a in 0..grid.dimension() {
            let [lo, hi] = torsion.bounds[a];
            if m[a] < lo || m[a] > hi {
                inside = false;
                break;
            }
            w *= if m[a] == lo || m[a] == hi { 0.5 * h[a] } else { h[a] };
        }
        if inside {
            acc += w * f(k);
        }
    }
    acc
}

/// Largest raw mass recorded up to time `t`.
fn sup_mass_until(trace: &Trace, t: f64) -> f64 {
    trace.rows.iter().filter(|r| r.t <= t + 1e-14).map(|r| r.mass).fold(f64::NEG_INFINITY, f64::max)
}

/// Checks the gradient estimate
/// `E(t) ≤ E(0)·exp[(1/(2C))·sup_{τ≤t} y·(∫φ ln u(t) − ∫φ ln u_0 + ∫_0^t∫_{Ω'} u)]`
/// at every snapshot, with `C = ∫_{Ω'} φ` of the subdomain torsion function.
pub fn gradient_bound_check(
    grid: &Grid,
    trace: &Trace,
    snapshots: &[Snapshot],
    subdomain: &TorsionSolution,
    u0eps: &Field,
    tol: f64,
) -> Result<Vec<CheckRow>> {
    let eps = trace.epsilon;
    let phi = &subdomain.phi.values;
    let phi_log = |u: &[f64]| -> Result<f64> {
        let mut acc = 0.0;
        let w = grid.quad_weights();
        for k in 0..grid.len() {
            if phi[k] > 0.0 {
                if !(u[k] > 0.0) {
                    return Err(Error::Diagnostic(format!("nonpositive value {} at node {k} inside the subdomain", u[k])));
                }
                acc += w[k] * phi[k] * u[k].ln();
            }
        }
        Ok(acc)
    };
    let log0 = phi_log(&u0eps.values)?;
    let e0 = grid.dirichlet_energy(u0eps, eps);
    let c = subdomain.c_subdomain;
    let mut out = Vec::with_capacity(snapshots.len());
    let mut time_integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in snapshots {
        grid.check_len(&s.values)?;
        let sub_mass = subdomain_integral(grid, subdomain, |k| s.values[k]);
        if let Some((tp, mp)) = prev {
            time_integral += 0.5 * (mp + sub_mass) * (s.t - tp);
        }
        prev = Some((s.t, sub_mass));
        let field = Field::new(s.values.clone());
        let e = grid.dirichlet_energy(&field, eps);
        let ymax = sup_mass_until(trace, s.t).max(grid.integrate(&field)?);
        let exponent = ymax / (2.0 * c) * (phi_log(&s.values)? - log0 + time_integral);
        let bound = e0 * exponent.exp();
        out.push(CheckRow::new("gradient_bound", s.t, e, bound, e <= bound * (1.0 + tol) + 1e-12));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConcentration {
    /// `q ∫_0^T ∫ u^{q−1}|∇u|²`.
    pub lhs: f64,
    /// `C(T) = −(1/q)∫u(T)^q + (1/q)∫u_0^q + ∫_0^T (∫u^q)(∫|∇u|²)`.
    pub bound: f64,
    /// `∫_0^T ∫_{Ω∖K} |∇u|²` over the margin collar.
    pub collar_energy: f64,
    /// `(2η)^{1−q} C(T)/q` with η the largest collar value of u.
    pub collar_bound: f64,
    pub eta: f64,
    /// `(t, C(t))` at every snapshot.
    pub bound_series: Vec<(f64, f64)>,
    /// Snapshots at which `C(t)` decreased relative to its predecessor.
    pub bound_decreases: usize,
}

/// Edge integrals `(∫ u^{q−1}|∇u|², ∫_{collar} |∇u|²)` of one snapshot, with
/// edge values of `u` taken as endpoint averages.
fn weighted_gradient_integrals(grid: &Grid, u: &[f64], q: f64, eps: f64, margin: f64) -> (f64, f64) {
    let val = |k: usize| if grid.is_boundary(k) { eps } else { u[k] };
    let mut weighted = 0.0;
    let mut collar = 0.0;
    for &(a, b, w) in grid.edges() {
        let d = val(b) - val(a);
        let mid = 0.5 * (val(a) + val(b));
        let g = w * d * d;
        weighted += mid.powf(q - 1.0) * g;
        let xa = grid.coord(a);
        let xb = grid.coord(b);
        let xm = [0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1])];
        let dist = (0..grid.dimension())
            .map(|ax| xm[ax].min(grid.extents()[ax] - xm[ax]))
            .fold(f64::INFINITY, f64::min);
        if dist < margin {
            collar += g;
        }
    }
    (weighted, collar)
}

/// Boundary-concentration estimate over the snapshot horizon.
pub fn boundary_concentration(
    grid: &Grid,
    snapshots: &[Snapshot],
    q: f64,
    margin: f64,
    u0eps: &Field,
    epsilon: f64,
) -> Result<BoundaryConcentration> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Precondition(format!("q must lie in (0, 1), got {q}")));
    }
    if snapshots.is_empty() {
        return Err(Error::Precondition("no snapshots".into()));
    }
    let int_q = |u: &[f64]| -> f64 { grid.quad_weights().iter().zip(u).map(|(w, v)| w * v.powf(q)).sum() };
    let start = int_q(&u0eps.values) / q;
    let mut lhs = 0.0;
    let mut collar_energy = 0.0;
    let mut forcing = 0.0;
    let mut eta: f64 = 0.0;
    let mut series = Vec::with_capacity(snapshots.len());
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for s in snapshots {
        grid.check_len(&s.values)?;
        let (wg, col) = weighted_gradient_integrals(grid, &s.values, q, epsilon, margin);
        let field = Field::new(s.values.clone());
        let e = grid.dirichlet_energy(&field, epsilon);
        let iq = int_q(&s.values);
        let f = iq * e;
        if let Some((tp, wp, cp, fp)) = prev {
            let dt = s.t - tp;
            lhs += 0.5 * (wp + wg) * dt;
            collar_energy += 0.5 * (cp + col) * dt;
            forcing += 0.5 * (fp + f) * dt;
        }
        prev = Some((s.t, wg, col, f));
        for k in 0..grid.len() {
            if grid.boundary_distance(k) < margin {
                eta = eta.max(s.values[k]);
            }
        }
        series.push((s.t, -iq / q + start + forcing));
    }
    let bound = series.last().map(|p| p.1).unwrap_or(0.0);
    let decreases = series.windows(2).filter(|w| w[1].1 < w[0].1).count();
    Ok(BoundaryConcentration {
        lhs: q * lhs,
        bound,
        collar_energy,
        collar_bound: (2.0 * eta).powf(1.0 - q) * bound / q,
        eta,
        bound_series: series,
        bound_decreases: decreases,
    })
}

/// Space-time test function for the weak formulation.
pub trait TestFunction {
    fn value(&self, x: [f64; 2], t: f64) -> f64;
    fn time_derivative(&self, x: [f64; 2], t: f64) -> f64;
    /// `Some((lo, hi, t_hi))`: spatial support box and last time of support.
    /// `None` for the zero function.
    fn support(&self) -> Option<([f64; 2], [f64; 2], f64)>;
}

/// The zero test function.
pub struct ZeroTest;

impl TestFunction for ZeroTest {
    fn value(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn time_derivative(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn support(&self) -> Option<([f64; 2], [f64; 2], f64)> {
        None
    }
}

/// Product of smooth bumps `b(s) = exp(1 − 1/(1 − s²))` in each coordinate
/// and in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTest {
    pub centre: [f64; 2],
    pub radius: [f64; 2],
    pub t_centre: f64,
    pub t_radius: f64,
    pub dimension: usize,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    }
}

impl BumpTest {
    fn space(&self, x: [f64; 2]) -> f64 {
        (0..self.dimension).map(|a| bump((x[a] - self.centre[a]) / self.radius[a])).product()
    }
}

impl TestFunction for BumpTest {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        self.space(x) * bump((t - self.t_centre) / self.t_radius)
    }
    fn time_derivative(&self, x: [f64; 2], t: f64) -> f64 {
        self.space(x) * bump_derivative((t - self.t_centre) / self.t_radius) / self.t_radius
    }
    fn support(&self) -> Option<([f64; 2], [f64; 2], f64)> {
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..self.dimension {
            lo[a] = self.centre[a] - self.radius[a];
            hi[a] = self.centre[a] + self.radius[a];
        }
        Some((lo, hi, self.t_centre + self.t_radius))
    }
}

/// Nodal gradient: central differences inside, one-sided at the boundary.
fn nodal_gradient(grid: &Grid, f: &[f64], k: usize) -> [f64; 2] {
    let m = grid.multi_index(k);
    let mut g = [0.0; 2];
    for a in 0..grid.dimension() {
        let n = grid.counts()[a];
        let h = grid.spacing()[a];
        let step = |i: usize| if a == 0 { grid.index(i, m[1]) } else { grid.index(m[0], i) };
        let i = m[a];
        g[a] = if i == 0 {
            (f[step(1)] - f[step(0)]) / h
        } else if i + 1 == n {
            (f[step(n - 1)] - f[step(n - 2)]) / h
        } else {
            (f[step(i + 1)] - f[step(i - 1)]) / (2.0 * h)
        };
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakFormTerms {
    /// `−∫∫ w φ_t`.
    pub time_term: f64,
    /// `∫∫ ∇w·∇(wφ)`.
    pub diffusion_term: f64,
    /// `∫ w_0 φ(·, 0)`.
    pub initial_term: f64,
    /// `∫ (∫ wφ)(∫|∇w|²) dt`.
    pub forcing_term: f64,
    /// `|LHS − RHS|` over the largest term magnitude.
    pub normalized_residual: f64,
}

/// Weak-form residual of `w = u − ε` from snapshots, with trapezoid rules in
/// space and time. Snapshots must start at t = 0.
pub fn weak_form_residual(grid: &Grid, snapshots: &[Snapshot], test: &dyn TestFunction, epsilon: f64) -> Result<WeakFormTerms> {
    if snapshots.is_empty() || snapshots[0].t != 0.0 {
        return Err(Error::Precondition("weak form needs snapshots starting at t = 0".into()));
    }
    let zero = WeakFormTerms { time_term: 0.0, diffusion_term: 0.0, initial_term: 0.0, forcing_term: 0.0, normalized_residual: 0.0 };
    let Some((lo, hi, t_hi)) = test.support() else {
        return Ok(zero);
    };
    for a in 0..grid.dimension() {
        if !(lo[a] > 0.0 && hi[a] < grid.extents()[a]) {
            return Err(Error::Precondition(format!("test function support leaves the domain on axis {a}")));
        }
    }
    let t_last = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    if t_hi > t_last {
        return Err(Error::Precondition(format!(
            "test function support reaches t = {t_hi}, beyond the last snapshot at {t_last}"
        )));
    }
    let weights = grid.quad_weights();
    let coords: Vec<[f64; 2]> = (0..grid.len()).map(|k| grid.coord(k)).collect();
    let mut integrands = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        grid.check_len(&s.values)?;
        let w: Vec<f64> = s.values.iter().enumerate().map(|(k, v)| if grid.is_boundary(k) { 0.0 } else { v - epsilon }).collect();
        let phi: Vec<f64> = coords.iter().map(|&x| test.value(x, s.t)).collect();
        let mut time_i = 0.0;
        let mut diff_i = 0.0;
        let mut wphi = 0.0;
        for k in 0..grid.len() {
            let q = weights[k];
            time_i += q * w[k] * test.time_derivative(coords[k], s.t);
            wphi += q * w[k] * phi[k];
            let gw = nodal_gradient(grid, &w, k);
            let gp = nodal_gradient(grid, &phi, k);
            let dot_ww = gw[0] * gw[0] + gw[1] * gw[1];
            let dot_wp = gw[0] * gp[0] + gw[1] * gp[1];
            diff_i += q * (phi[k] * dot_ww + w[k] * dot_wp);
        }
        let energy = grid.dirichlet_energy(&Field::new(w.clone()), 0.0);
        integrands.push((s.t, time_i, diff_i, wphi * energy));
    }
    let mut terms = zero;
    for pair in integrands.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dt = b.0 - a.0;
        terms.time_term -= 0.5 * (a.1 + b.1) * dt;
        terms.diffusion_term += 0.5 * (a.2 + b.2) * dt;
        terms.forcing_term += 0.5 * (a.3 + b.3) * dt;
    }
    let s0 = &snapshots[0];
    terms.initial_term = (0..grid.len())
        .map(|k| if grid.is_boundary(k) { 0.0 } else { weights[k] * (s0.values[k] - epsilon) * test.value(coords[k], 0.0) })
        .sum();
    let lhs = terms.time_term + terms.diffusion_term;
    let rhs = terms.initial_term + terms.forcing_term;
    let scale = [terms.time_term, terms.diffusion_term, terms.initial_term, terms.forcing_term]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    terms.normalized_residual = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    Ok(terms)
}

/// Energy growth inequality `dE/dt ≤ (∫u)·E² + tol·(1 + E²)` between rows.
pub fn energy_odi_check(trace: &Trace, tol: f64) -> Vec<CheckRow> {
    trace
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let rate = (b.dirichlet_energy - a.dirichlet_energy) / (b.t - a.t);
            let e = a.dirichlet_energy.max(b.dirichlet_energy);
            let bound = a.mass.max(b.mass) * e * e;
            CheckRow::new("energy_odi", b.t, rate, bound, rate <= bound + tol * (1.0 + e * e))
        })
        .collect()
}

/// Corrected mass is nonincreasing below 1 and nondecreasing above 1, up to
/// `tol` per row.
pub fn mass_monotonicity_check(trace: &Trace, tol: f64) -> Vec<CheckRow> {
    let y = trace.corrected_masses();
    (1..y.len())
        .filter_map(|k| {
            let change = y[k] - y[k - 1];
            if y[k - 1] < 1.0 {
                Some(CheckRow::new("mass_monotone", trace.rows[k].t, change, tol, change <= tol))
            } else if y[k - 1] > 1.0 {
                Some(CheckRow::new("mass_monotone", trace.rows[k].t, change, -tol, change >= -tol))
            } else {
                None
            }
        })
        .collect()
}

/// Mass rate against the Poincaré comparison: subcritical runs need
/// `y' ≤ −(1 − slack)(1 − y0) y²/(C_P|Ω|)`, supercritical runs need
/// `y' ≥ (1 − slack)(y0 − 1) y²/(C_P|Ω|)`.
pub fn poincare_rate_check(trace: &Trace, c_p: f64, slack: f64) -> Result<Vec<CheckRow>> {
    let res = mass_ode_residual(trace)?;
    let y = &res.corrected_mass;
    let y0 = y[0];
    let scale = 1.0 / (c_p * trace.measure);
    let mut out = Vec::new();
    for k in 1..y.len() - 1 {
        let der = (y[k + 1] - y[k - 1]) / (res.t[k + 1] - res.t[k - 1]);
        let row = if y0 < 1.0 {
            let bound = -(1.0 - slack) * (1.0 - y0) * y[k] * y[k] * scale;
            CheckRow::new("poincare_decay_rate", res.t[k], der, bound, der <= bound)
        } else if y0 > 1.0 {
            let bound = (1.0 - slack) * (y0 - 1.0) * y[k] * y[k] * scale;
            CheckRow::new("poincare_growth_rate", res.t[k], der, bound, der >= bound)
        } else {
            continue;
        };
        out.push(row);
    }
    Ok(out)
}

/// Interior lower barrier: `min_K u(t) ≥ y(t)·φ_K` with
/// `y(t) = c₃/(1 + c₃t)` and `c₃ = min_K u_0/φ_K`.
pub fn interior_barrier_check(grid: &Grid, snapshots: &[Snapshot], core: &TorsionSolution, u0eps: &Field, tol: f64) -> Vec<CheckRow> {
    let inside: Vec<usize> = (0..grid.len()).filter(|&k| core.phi.values[k] > 0.0).collect();
    let c3 = inside.iter().map(|&k| u0eps.values[k] / core.phi.values[k]).fold(f64::INFINITY, f64::min);
    snapshots
        .iter()
        .map(|s| {
            let y = c3 / (1.0 + c3 * s.t);
            let worst = inside
                .iter()
                .map(|&k| s.values[k] - y * core.phi.values[k])
                .fold(f64::INFINITY, f64::min);
            CheckRow::new("interior_barrier", s.t, worst, -tol, worst >= -tol)
        })
        .collect()
}

/// Sup norm against the comparison bound `e^{B+1}(M + max Φ)` with `M` the
/// initial sup and `B` the time-integrated nonlocal forcing up to each row.
pub fn comparison_bound_check(trace: &Trace, torsion: &TorsionSolution, tol: f64) -> Result<Vec<CheckRow>> {
    let m = trace.rows.first().map(|r| r.sup_norm).ok_or_else(|| Error::Diagnostic("empty trace".into()))?;
    let mut b = 0.0;
    let mut out = Vec::with_capacity(trace.len());
    for (k, r) in trace.rows.iter().enumerate() {
        if k > 0 {
            let p = &trace.rows[k - 1];
            b += 0.5 * (p.rho_eps_value + r.rho_eps_value) * (r.t - p.t);
        }
        let bound = crate::solver::comparison_upper_bound(m, b, torsion)?;
        out.push(CheckRow::new("comparison_bound", r.t, r.sup_norm, bound, r.sup_norm <= bound + tol));
    }
    Ok(out)
}

/// Energy and corrected mass in the last row against `factor` times their
/// medians over the trace. Both must pass on a run that blows up.
pub fn unbounded_growth_check(trace: &Trace, factor: f64) -> Result<Vec<CheckRow>> {
    let last = trace.rows.last().ok_or_else(|| Error::Diagnostic("empty trace".into()))?;
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
    };
    let e_med = median(trace.energies());
    let y_med = median(trace.corrected_masses());
    let y_last = trace.corrected_mass(trace.len() - 1);
    Ok(vec![
        CheckRow::new("energy_growth", last.t, last.dirichlet_energy, factor * e_med, last.dirichlet_energy >= factor * e_med),
        CheckRow::new("mass_growth", last.t, y_last, factor * y_med, y_last >= factor * y_med),
    ])
}
