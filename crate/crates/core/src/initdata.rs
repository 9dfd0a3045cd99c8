//! Initial data for the regularized problem.

use crate::elliptic::solve_torsion_in;
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::real::Real;

/// `ε + m·Φ/∫Φ`: the torsion profile with corrected mass `m`, built in the
/// run precision. On the unit interval with `m = 1` it is an exact discrete
/// steady state.
pub fn torsion_profile<T: Real>(grid: &Grid, epsilon: f64, mass: f64) -> Result<Field<T>> {
    if !(mass > 0.0) {
        return Err(Error::Precondition(format!("profile mass must be positive, got {mass}")));
    }
    let tol = (1e3 * T::EPSILON).max(1e-30);
    let torsion = solve_torsion_in::<T>(grid, tol)?;
    let scale = T::of(mass) / torsion.c_subdomain;
    let eps = T::of(epsilon);
    Ok(torsion.phi.map(|p| eps + scale * p))
}

/// Ingredients of the regularized initial data `u0eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitDataRecipe {
    /// Target data: nonnegative, zero on the boundary, positive inside.
    pub u0: Field,
    pub epsilon: f64,
    pub mollify_radius: f64,
    /// The bump θ is supported at distance ≥ `margin_theta` from the boundary.
    pub margin_theta: f64,
    /// The cutoff ρ equals 1 at distance ≥ `margin_rho`.
    pub margin_rho: f64,
    /// Bound on `‖u0‖_Φ`.
    pub l_bound: f64,
}

impl InitDataRecipe {
    /// Recipe with `L` set 10% above `max(∫|∇u0|², ‖u0‖_Φ)`.
    pub fn with_headroom(grid: &Grid, u0: Field, epsilon: f64, mollify_radius: f64, margin_theta: f64, margin_rho: f64) -> Result<Self> {
        let torsion = crate::elliptic::solve_torsion(grid)?;
        let l = grid.dirichlet_energy(&u0, 0.0).max(crate::elliptic::phi_weighted_sup(&u0, &torsion));
        Ok(InitDataRecipe { u0, epsilon, mollify_radius, margin_theta, margin_rho, l_bound: 1.1 * l })
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        grid.check_len(&self.u0.values)?;
        let bad = |m: String| Err(Error::Precondition(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.margin_theta > self.margin_rho && self.margin_rho > 0.0) {
            return bad(format!("need margin_theta > margin_rho > 0, got {} and {}", self.margin_theta, self.margin_rho));
        }
        let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
        if self.margin_rho < 3.0 * h * (1.0 - 1e-12) {
            return bad(format!("margin_rho {} must be at least three grid spacings", self.margin_rho));
        }
        for (k, &v) in self.u0.values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("u0 must be finite and nonnegative (node {k})"));
            }
            if grid.is_boundary(k) && v != 0.0 {
                return bad(format!("u0 must vanish on the boundary (node {k})"));
            }
            if !grid.is_boundary(k) && v <= 0.0 {
                return bad(format!("u0 must be positive inside the domain (node {k})"));
            }
        }
        let torsion = crate::elliptic::solve_torsion(grid)?;
        let norm = crate::elliptic::phi_weighted_sup(&self.u0, &torsion);
        if norm > self.l_bound {
            return bad(format!("‖u0‖_Φ = {norm} exceeds L = {}", self.l_bound));
        }
        Ok(())
    }
}

/// One measured property of constructed initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitDataResult {
    pub u0eps: Field,
    /// Root of `A C² + B C + Γ = 0`; equals `∫|∇u0eps|²`.
    pub c: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    /// Mollified, inward-shifted data.
    pub phi_data: Field,
    pub cutoff: Field,
    pub theta: Field,
    /// Lower bound promised on the θ core.
    pub c_k: f64,
    /// ε|Ω|, the mass offset of `u0eps` over `u0`.
    pub mass_offset: f64,
    pub report: Vec<PropertyCheck>,
}

/// Bilinear interpolation of `f` at `x`, clamped to the domain.
fn sample(grid: &Grid, f: &Field, x: [f64; 2]) -> f64 {
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for a in 0..grid.dimension() {
        let n = grid.counts()[a];
        let s = (x[a] / grid.spacing()[a]).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    if grid.dimension() == 1 {
        let (i, t) = (base[0], frac[0]);
        return (1.0 - t) * f.values[i] + t * f.values[i + 1];
    }
    let (i, j) = (base[0], base[1]);
    let (s, t) = (frac[0], frac[1]);
    let v = |a: usize, b: usize| f.values[grid.index(a, b)];
    (1.0 - s) * (1.0 - t) * v(i, j) + s * (1.0 - t) * v(i + 1, j) + (1.0 - s) * t * v(i, j + 1) + s * t * v(i + 1, j + 1)
}

/// Width of the stretched collar used by the inward shift.
fn shift_width(extent: f64, r: f64) -> f64 {
    4.0 * r + 0.1 * extent
}

/// Per-axis inward shift: the collar `[0, 2r)` maps to the boundary, `[2r, W)`
/// is stretched onto `[0, W)`, the rest is fixed.
fn shift_coordinate(x: f64, extent: f64, r: f64) -> f64 {
    let w = shift_width(extent, r);
    let collar = |z: f64| {
        if z < 2.0 * r {
            0.0
        } else if z < w {
            (z - 2.0 * r) * w / (w - 2.0 * r)
        } else {
            z
        }
    };
    if x <= 0.5 * extent {
        collar(x)
    } else {
        extent - collar(extent - x)
    }
}

/// Shifts `u0` away from the boundary, then convolves it with a normalized
/// cosine bump of the given radius. The result vanishes within `radius` of
/// the boundary.
pub fn mollify(grid: &Grid, u0: &Field, radius: f64) -> Result<Field> {
    grid.check_len(&u0.values)?;
    if radius < grid.min_spacing() * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("mollify radius {radius} is below the grid spacing")));
    }
    let dim = grid.dimension();
    for a in 0..dim {
        if shift_width(grid.extents()[a], radius) >= 0.5 * grid.extents()[a] {
            return Err(Error::Precondition(format!("mollify radius {radius} leaves no support on axis {a}")));
        }
    }
    let shifted: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.coord(k);
            let mut y = [0.0; 2];
            for a in 0..dim {
                y[a] = shift_coordinate(x[a], grid.extents()[a], radius);
            }
            sample(grid, u0, y)
        })
        .collect();

    let mut reach = [0isize; 2];
    let mut kernels: [Vec<f64>; 2] = [vec![1.0], vec![1.0]];
    for a in 0..dim {
        let h = grid.spacing()[a];
        let m = ((radius / h) * (1.0 + 1e-12)).floor() as isize;
        reach[a] = m;
        kernels[a] = (-m..=m)
            .map(|i| {
                let d = (i as f64 * h / radius).abs();
                if d < 1.0 { (std::f64::consts::FRAC_PI_2 * d).cos().powi(2) } else { 0.0 }
            })
            .collect();
        let s: f64 = kernels[a].iter().sum();
        kernels[a].iter_mut().for_each(|w| *w /= s);
    }
    let n = grid.counts();
    let mut out = vec![0.0; grid.len()];
    for k in grid.interior() {
        let m = grid.multi_index(k);
        let mut acc = 0.0;
        for (di, wi) in (-reach[0]..=reach[0]).zip(&kernels[0]) {
            let i = m[0] as isize + di;
            if i < 0 || i >= n[0] as isize {
                continue;
            }
            if dim == 1 {
                acc += wi * shifted[i as usize];
                continue;
            }
            for (dj, wj) in (-reach[1]..=reach[1]).zip(&kernels[1]) {
                let j = m[1] as isize + dj;
                if j < 0 || j >= n[1] as isize {
                    continue;
                }
                acc += wi * wj * shifted[grid.index(i as usize, j as usize)];
            }
        }
        out[k] = acc.max(0.0);
    }
    Ok(Field::new(out))
}

/// `sin²` ramp from 0 at distance `2h` to 1 at `margin`, per axis and
/// multiplied. Vanishes on the first two node layers so the boundary stencil
/// sees `(1 − ρ)Φ` only.
fn cutoff(grid: &Grid, margin: f64) -> Field {
    let ramp = |d: f64, h: f64| {
        let lo = 2.0 * h;
        let s = ((d - lo) / (margin - lo)).clamp(0.0, 1.0);
        (std::f64::consts::FRAC_PI_2 * s).sin().powi(2)
    };
    Field::from_fn(grid, |x| {
        (0..grid.dimension())
            .map(|a| ramp(x[a].min(grid.extents()[a] - x[a]), grid.spacing()[a]))
            .product()
    })
}

/// Product-cosine bump on the box at distance `margin` from the boundary,
/// scaled to unit discrete mass.
fn theta_bump(grid: &Grid, margin: f64) -> Result<Field> {
    let raw = Field::from_fn(grid, |x| {
        (0..grid.dimension())
            .map(|a| {
                let l = grid.extents()[a];
                let half = 0.5 * l - margin;
                let s = (x[a] - 0.5 * l) / half;
                if s.abs() < 1.0 { (std::f64::consts::FRAC_PI_2 * s).cos().powi(2) } else { 0.0 }
            })
            .product()
    });
    let mass = grid.integrate(&raw)?;
    if !(mass > 0.0) {
        return Err(Error::Precondition(format!("margin_theta {margin} leaves no room for the bump")));
    }
    Ok(raw.map(|v| v / mass))
}

/// `u0eps = ε + C(1 − ρ)Φ + ρ(φ + αθ)` with `C` the root of the energy
/// quadratic and `α` matching the mass.
pub fn construct_initial(grid: &Grid, recipe: &InitDataRecipe) -> Result<InitDataResult> {
    recipe.validate(grid)?;
    let eps = recipe.epsilon;
    let torsion = crate::elliptic::solve_torsion(grid)?;
    let phi_big = &torsion.phi;
    let phi_data = mollify(grid, &recipe.u0, recipe.mollify_radius)?;
    let rho = cutoff(grid, recipe.margin_rho);
    let theta = theta_bump(grid, recipe.margin_theta)?;

    // u0eps − ε = C·P + Q with α = a0 − C·I/Tθ.
    let outer = phi_big.zip_map(&rho, |p, r| (1.0 - r) * p);
    let rho_theta = rho.zip_map(&theta, |r, t| r * t);
    let rho_phi = rho.zip_map(&phi_data, |r, p| r * p);
    let i_outer = grid.integrate(&outer)?;
    let t_theta = grid.integrate(&rho_theta)?;
    let a0 = (grid.integrate(&recipe.u0)? - grid.integrate(&rho_phi)?) / t_theta;
    let p_field = outer.zip_map(&rho_theta, |o, rt| o - i_outer / t_theta * rt);
    let q_field = rho_phi.zip_map(&rho_theta, |rp, rt| rp + a0 * rt);

    let a = grid.dirichlet_energy(&p_field, 0.0);
    let b = 2.0 * grid.gradient_inner(&p_field, 0.0, &q_field, 0.0) - 1.0;
    let gamma = grid.dirichlet_energy(&q_field, 0.0);
    let disc = b * b - 4.0 * a * gamma;
    if disc < 0.0 {
        return Err(Error::NoRealRoot(disc));
    }
    let c = -2.0 * gamma / (b - disc.sqrt());
    if !(c > 0.0) {
        return Err(Error::NonPositiveC(c));
    }
    let alpha = a0 - c * i_outer / t_theta;
    let mut u0eps = p_field.zip_map(&q_field, |p, q| eps + c * p + q);
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            u0eps.values[k] = eps;
        }
    }
    let c_k = 0.5
        * (0..grid.len())
            .filter(|&k| theta.values[k] > 0.0)
            .map(|k| phi_data.values[k])
            .fold(f64::INFINITY, f64::min);
    let mut result = InitDataResult {
        u0eps,
        c,
        alpha,
        a,
        b,
        gamma,
        phi_data,
        cutoff: rho,
        theta,
        c_k,
        mass_offset: eps * grid.measure(),
        report: Vec::new(),
    };
    result.report = verify_approx_properties(grid, &result, recipe)?;
    Ok(result)
}

/// `‖f − g‖_{W^{1,2}}` with the boundary difference taken from the fields.
pub fn w12_distance(grid: &Grid, f: &Field, g: &Field) -> Result<f64> {
    grid.check_len(&f.values)?;
    grid.check_len(&g.values)?;
    let d = f.zip_map(g, |a, b| a - b);
    let b = grid.boundary_mask().iter().position(|&m| m).map(|k| d.values[k]).unwrap_or(0.0);
    Ok((crate::mesh::l2_distance(grid, f, g).powi(2) + grid.dirichlet_energy(&d, b)).sqrt())
}

/// Measures the approximation properties of `result`.
pub fn verify_approx_properties(grid: &Grid, result: &InitDataResult, recipe: &InitDataRecipe) -> Result<Vec<PropertyCheck>> {
    let eps = recipe.epsilon;
    let u = &result.u0eps;
    grid.check_len(&u.values)?;
    let mut out = Vec::new();
    let mut push = |property, measured: f64, threshold: f64, pass: bool| out.push(PropertyCheck { property, measured, threshold, pass });

    let boundary_dev = (0..grid.len()).filter(|&k| grid.is_boundary(k)).map(|k| (u.values[k] - eps).abs()).fold(0.0, f64::max);
    push("a1_boundary", boundary_dev, 1e-8, boundary_dev <= 1e-8);
    let floor_dev = u.values.iter().map(|&v| eps - v).fold(f64::NEG_INFINITY, f64::max);
    push("a1_floor", floor_dev, 1e-8, floor_dev <= 1e-8);

    let energy = grid.dirichlet_energy(u, eps);
    let lap = grid.laplacian(u, eps);
    let adjacent: Vec<usize> = grid
        .interior()
        .filter(|&k| grid.boundary_distance(k) <= grid.spacing().iter().cloned().fold(0.0, f64::max) * (1.0 + 1e-9))
        .collect();
    let compat = adjacent.iter().map(|&k| (lap.values[k] + energy).abs()).fold(0.0, f64::max) / energy.max(f64::MIN_POSITIVE);
    push("a1_compatibility", compat, 0.1, compat <= 0.1);

    let torsion = crate::elliptic::solve_torsion(grid)?;
    let norm = crate::elliptic::phi_weighted_sup(&u.map(|v| v - eps), &torsion);
    push("ae_phi_norm", norm, recipe.l_bound + 0.1, norm <= recipe.l_bound + 0.1);

    let core_min = (0..grid.len()).filter(|&k| result.theta.values[k] > 0.0).map(|k| u.values[k]).fold(f64::INFINITY, f64::min);
    push("a3_core_lower_bound", core_min, result.c_k, result.c_k > 0.0 && core_min >= result.c_k);

    let dist = w12_distance(grid, u, &recipe.u0)?;
    push("a5_w12_distance", dist, f64::INFINITY, dist.is_finite());

    let mass_err = (grid.integrate(u)? - grid.integrate(&recipe.u0)? - result.mass_offset).abs();
    push("a6_mass", mass_err, 1e-10, mass_err <= 1e-10);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSequence {
    pub epsilons: Vec<f64>,
    pub results: Vec<InitDataResult>,
    /// `|C − ∫|∇u0|²| / ∫|∇u0|²` per ε.
    pub c_gaps: Vec<f64>,
    pub alphas: Vec<f64>,
    pub w12_distances: Vec<f64>,
    pub gaps_shrink: bool,
    pub alphas_shrink: bool,
    pub distances_decrease: bool,
}

/// Builds `u0eps` for each ε, with the mollify radius and both margins scaled
/// by `sqrt(ε/ε_0)` (floored at one and three grid spacings) so the approximation
/// tightens as ε decreases.
pub fn epsilon_sequence(grid: &Grid, base: &InitDataRecipe, epsilons: &[f64]) -> Result<EpsilonSequence> {
    let e0 = epsilons.first().copied().ok_or_else(|| Error::Precondition("empty epsilon sequence".into()))?;
    let target = grid.dirichlet_energy(&base.u0, 0.0);
    let h = grid.min_spacing();
    let mut results = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let s = (eps / e0).sqrt();
        let radius = (base.mollify_radius * s).max(h);
        let margin_rho = (base.margin_rho * s).max(3.0 * h);
        let recipe = InitDataRecipe { epsilon: eps, mollify_radius: radius, margin_rho, ..base.clone() };
        results.push(construct_initial(grid, &recipe)?);
    }
    let c_gaps: Vec<f64> = results.iter().map(|r| (r.c - target).abs() / target).collect();
    let alphas: Vec<f64> = results.iter().map(|r| r.alpha).collect();
    let w12_distances: Vec<f64> = results
        .iter()
        .map(|r| w12_distance(grid, &r.u0eps, &base.u0))
        .collect::<Result<_>>()?;
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let abs_alphas: Vec<f64> = alphas.iter().map(|a| a.abs()).collect();
    Ok(EpsilonSequence {
        epsilons: epsilons.to_vec(),
        gaps_shrink: decreasing(&c_gaps),
        alphas_shrink: decreasing(&abs_alphas),
        distances_decrease: decreasing(&w12_distances),
        results,
        c_gaps,
        alphas,
        w12_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_torsion;
    use crate::mesh::l2_distance;

    fn half_torsion(g: &Grid) -> Field {
        solve_torsion(g).unwrap().phi.map(|p| 0.5 * p)
    }

    #[test]
    fn unit_mass_profile_is_steady_in_double_double() {
        let g = Grid::unit_interval(101).unwrap();
        let u = torsion_profile::<crate::real::DoubleDouble>(&g, 1e-3, 1.0).unwrap();
        let e = g.dirichlet_energy(&u, crate::real::DoubleDouble::of(1e-3));
        let lap = g.laplacian(&u, crate::real::DoubleDouble::of(1e-3));
        for k in g.interior() {
            assert!((lap.values[k] + e).abs().to_f64_lossy() < 1e-25);
        }
    }

    #[test]
    fn mollify_zero_is_zero() {
        let g = Grid::unit_interval(101).unwrap();
        let z = mollify(&g, &Field::constant(&g, 0.0), 0.05).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mollify_preserves_interior_mass() {
        let g = Grid::unit_interval(201).unwrap();
        let bump = Field::from_fn(&g, |x| if (0.3..=0.7).contains(&x[0]) { 1.0 } else { 0.0 });
        let h = g.spacing()[0];
        let m = mollify(&g, &bump, h).unwrap();
        assert!((g.integrate(&m).unwrap() - g.integrate(&bump).unwrap()).abs() <= 1e-12);
        let wide = mollify(&g, &bump, 5.0 * h).unwrap();
        assert!((g.integrate(&wide).unwrap() - g.integrate(&bump).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn mollified_torsion_is_close_and_supported_inside() {
        let g = Grid::unit_interval(201).unwrap();
        let phi = solve_torsion(&g).unwrap().phi;
        let m = mollify(&g, &phi, 0.05).unwrap();
        assert!(l2_distance(&g, &m, &phi) <= 0.02);
        for k in 0..g.len() {
            if g.boundary_distance(k) < 0.05 - 1e-12 {
                assert_eq!(m.values[k], 0.0, "node {k}");
            }
        }
    }

    #[test]
    fn mollified_torsion_matches_direct_fine_convolution() {
        // Oracle: the same shift and kernel evaluated with closed-form Φ at
        // every kernel node instead of interpolated grid values.
        let g = Grid::unit_interval(201).unwrap();
        let r = 0.05;
        let h = g.spacing()[0];
        let m = mollify(&g, &solve_torsion(&g).unwrap().phi, r).unwrap();
        let exact = |z: f64| if z > 0.0 && z < 1.0 { z * (1.0 - z) / 2.0 } else { 0.0 };
        let reach = (r / h + 1e-9).floor() as i32;
        let w: Vec<f64> = (-reach..=reach).map(|i| (std::f64::consts::FRAC_PI_2 * (i as f64 * h / r).abs()).cos().powi(2)).collect();
        let sw: f64 = w.iter().sum();
        for k in g.interior() {
            let x = g.coord(k)[0];
            let v: f64 = (-reach..=reach)
                .zip(&w)
                .map(|(i, wi)| {
                    let y = x + i as f64 * h;
                    if !(0.0..=1.0).contains(&y) { 0.0 } else { wi * exact(shift_coordinate(y, 1.0, r)) }
                })
                .sum::<f64>()
                / sw;
            // Linear interpolation of Φ between nodes: error ≤ h²/8·max|Φ″|.
            assert!((m.values[k] - v).abs() <= h * h / 8.0 + 1e-15, "node {k}: {} vs {v}", m.values[k]);
        }
    }

    #[test]
    fn mollify_rejects_bad_radii() {
        let g = Grid::unit_interval(101).unwrap();
        let u = half_torsion(&g);
        assert!(mollify(&g, &u, 0.001).is_err());
        assert!(mollify(&g, &u, 0.2).is_err());
    }

    fn recipe(g: &Grid, eps: f64) -> InitDataRecipe {
        let h = g.spacing()[0];
        InitDataRecipe::with_headroom(g, half_torsion(g), eps, h, 0.25, 3.0 * h).unwrap()
    }

    #[test]
    fn construction_matches_energy_and_boundary() {
        let g = Grid::unit_interval(201).unwrap();
        let r = construct_initial(&g, &recipe(&g, 1e-3)).unwrap();
        let target = 0.25 / 12.0;
        assert!((r.c - target).abs() <= 0.1 * target, "C = {}", r.c);
        assert_eq!(r.u0eps.values[0], 1e-3);
        assert_eq!(r.u0eps.values[200], 1e-3);
        assert!((g.dirichlet_energy(&r.u0eps, 1e-3) - r.c).abs() < 1e-10 * r.c);
        assert!((r.a * r.c * r.c + r.b * r.c + r.gamma).abs() < 1e-12);
        for check in &r.report {
            assert!(check.pass, "{check:?}");
        }
    }

    #[test]
    fn corrupted_boundary_fails_a1() {
        let g = Grid::unit_interval(201).unwrap();
        let rec = recipe(&g, 1e-3);
        let mut r = construct_initial(&g, &rec).unwrap();
        r.u0eps.values[0] = 0.5;
        let report = verify_approx_properties(&g, &r, &rec).unwrap();
        assert!(!report.iter().find(|c| c.property == "a1_boundary").unwrap().pass);
    }

    #[test]
    fn recipe_rejects_invalid_data() {
        let g = Grid::unit_interval(101).unwrap();
        let mut rec = recipe(&g, 1e-3);
        rec.u0 = Field::constant(&g, 0.0);
        assert!(construct_initial(&g, &rec).is_err());
        let mut rec = recipe(&g, 1e-3);
        rec.margin_rho = 0.3;
        assert!(construct_initial(&g, &rec).is_err());
        let mut rec = recipe(&g, 1e-3);
        rec.margin_rho = 0.01;
        assert!(construct_initial(&g, &rec).is_err());
        let mut rec = recipe(&g, 1e-3);
        rec.l_bound = 0.1;
        assert!(construct_initial(&g, &rec).is_err());
    }

    #[test]
    fn epsilon_sequence_converges() {
        let g = Grid::unit_interval(201).unwrap();
        let base = InitDataRecipe { mollify_radius: 0.02, margin_rho: 0.03, ..recipe(&g, 1e-2) };
        let seq = epsilon_sequence(&g, &base, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(seq.gaps_shrink, "{:?}", seq.c_gaps);
        assert!(seq.alphas_shrink, "{:?}", seq.alphas);
        assert!(seq.distances_decrease, "{:?}", seq.w12_distances);
        for r in &seq.results {
            assert!(r.report.iter().all(|c| c.pass), "{:?}", r.report);
        }
    }

    #[test]
    fn two_dimensional_construction() {
        let g = Grid::new(2, &[1.0, 1.0], &[81, 81]).unwrap();
        let u0 = solve_torsion(&g).unwrap().phi;
        let h = g.spacing()[0];
        let rec = InitDataRecipe::with_headroom(&g, u0, 1e-3, h, 0.1, 3.0 * h).unwrap();
        let r = construct_initial(&g, &rec).unwrap();
        assert!(r.report.iter().all(|c| c.pass), "{:?}", r.report);
    }
}
