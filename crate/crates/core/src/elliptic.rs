//! Torsion functions `-ΔΦ = 1`, `Φ = 0` on the boundary, on the full domain or a
//! concentric sub-box, plus the Φ-weighted sup norm and the discrete Poincaré
//! constant.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::real::Real;

/// Relative residual used for torsion solves. Tighter than strictly needed so
/// the 1D solution is stencil-exact to roundoff.
pub const TORSION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainTag {
    Full,
    Subdomain { margin: f64 },
}

impl DomainTag {
    pub fn label(&self) -> String {
        match self {
            DomainTag::Full => "full".to_string(),
            DomainTag::Subdomain { margin } => format!("subdomain:{margin}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TorsionSolution<T = f64> {
    pub phi: Field<T>,
    pub domain_tag: DomainTag,
    /// ∫ phi over its own domain.
    pub c_subdomain: T,
    /// Node-index box `[lo, hi]` per axis of the domain's closure.
    pub bounds: [[usize; 2]; 2],
}

impl<T: Real> TorsionSolution<T> {
    pub fn max_phi(&self) -> T {
        self.phi.max()
    }

    /// Nodes strictly inside the solution's domain.
    pub fn is_inside(&self, grid: &Grid, idx: usize) -> bool {
        let m = grid.multi_index(idx);
        (0..grid.dimension()).all(|a| m[a] > self.bounds[a][0] && m[a] < self.bounds[a][1])
    }
}

/// Preconditioned conjugate gradients for `A x = b` with a diagonal
/// preconditioner. `x` holds the initial guess on entry.
pub fn pcg<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    inv_diag: &[T],
    b: &[T],
    x: &mut [T],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    let dot = |a: &[T], c: &[T]| a.iter().zip(c).fold(T::zero(), |s, (&p, &q)| s + p * q);
    let b_norm = dot(b, b).sqrt();
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(0);
    }
    let tol = T::of(rel_tol) * b_norm;
    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&a, &d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    for it in 0..max_iter {
        if res <= tol {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        res = dot(&r, &r).sqrt();
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if res <= tol {
        return Ok(max_iter);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: (res / b_norm).to_f64_lossy() })
}

/// `-Δ_h` with zero Dirichlet data on interior nodes, identity on boundary nodes.
fn neg_laplacian_apply<T: Real>(grid: &Grid, x: &[T], out: &mut [T]) {
    grid.laplacian_into(x, T::zero(), out);
    for k in 0..grid.len() {
        out[k] = if grid.is_boundary(k) { x[k] } else { -out[k] };
    }
}

fn neg_laplacian_inv_diag<T: Real>(grid: &Grid) -> Vec<T> {
    let d: f64 = grid.stencil().iter().map(|&(_, c)| 2.0 * c).sum();
    (0..grid.len())
        .map(|k| if grid.is_boundary(k) { T::one() } else { T::of(1.0 / d) })
        .collect()
}

/// Solve `-Δ_h x = b` on `grid` with zero boundary values.
pub fn poisson_solve<T: Real>(grid: &Grid, b: &[T], x: &mut [T], rel_tol: f64) -> Result<usize> {
    let rhs: Vec<T> = (0..grid.len()).map(|k| if grid.is_boundary(k) { T::zero() } else { b[k] }).collect();
    let inv = neg_laplacian_inv_diag::<T>(grid);
    pcg(|v, o| neg_laplacian_apply(grid, v, o), &inv, &rhs, x, rel_tol, 10 * grid.len())
}

pub fn solve_torsion(grid: &Grid) -> Result<TorsionSolution> {
    solve_torsion_in(grid, TORSION_TOL)
}

/// Torsion function in any precision, solved to relative residual `rel_tol`.
pub fn solve_torsion_in<T: Real>(grid: &Grid, rel_tol: f64) -> Result<TorsionSolution<T>> {
    let ones = vec![T::one(); grid.len()];
    let mut x = vec![T::zero(); grid.len()];
    poisson_solve(grid, &ones, &mut x, rel_tol)?;
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            x[k] = T::zero();
        }
    }
    let phi = Field::new(x);
    let c = grid.integrate(&phi)?;
    let bounds = [[0, grid.counts()[0] - 1], [0, if grid.dimension() == 2 { grid.counts()[1] - 1 } else { 0 }]];
    Ok(TorsionSolution { phi, domain_tag: DomainTag::Full, c_subdomain: c, bounds })
}

pub fn solve_torsion_subdomain(grid: &Grid, margin: f64) -> Result<TorsionSolution> {
    solve_torsion_subdomain_in(grid, margin, TORSION_TOL)
}

/// Torsion function of the concentric box shrunk by `margin`, snapped to grid
/// nodes, extended by zero.
pub fn solve_torsion_subdomain_in<T: Real>(grid: &Grid, margin: f64, rel_tol: f64) -> Result<TorsionSolution<T>> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Precondition(format!("margin must be nonnegative, got {margin}")));
    }
    let dim = grid.dimension();
    let mut bounds = [[0usize, 0usize]; 2];
    let mut ext = Vec::with_capacity(dim);
    let mut counts = Vec::with_capacity(dim);
    for a in 0..dim {
        let n = grid.counts()[a];
        let lo = (margin / grid.spacing()[a]).round() as usize;
        let hi = (n - 1).saturating_sub(lo);
        if hi <= lo || hi - lo < 4 {
            return Err(Error::Precondition(format!(
                "margin {margin} leaves fewer than 3 interior nodes on axis {a}"
            )));
        }
        bounds[a] = [lo, hi];
        ext.push((hi - lo) as f64 * grid.spacing()[a]);
        counts.push(hi - lo + 1);
    }
    let sub = Grid::new(dim, &ext, &counts)?;
    let local = solve_torsion_in::<T>(&sub, rel_tol)?;
    let mut values = vec![T::zero(); grid.len()];
    for k in 0..sub.len() {
        let [i, j] = sub.multi_index(k);
        let g = grid.index(i + bounds[0][0], j + bounds[1][0]);
        values[g] = local.phi.values[k];
    }
    Ok(TorsionSolution {
        phi: Field::new(values),
        domain_tag: DomainTag::Subdomain { margin },
        c_subdomain: local.c_subdomain,
        bounds,
    })
}

/// `max |v/Φ|` over nodes strictly inside the torsion solution's domain.
pub fn phi_weighted_sup<T: Real>(v: &Field<T>, torsion: &TorsionSolution<T>) -> T {
    let mut best = T::zero();
    for (&a, &p) in v.values.iter().zip(&torsion.phi.values) {
        if p > T::zero() {
            let r = (a / p).abs();
            if r > best || r.is_nan() {
                best = r;
            }
        }
    }
    best
}

/// Discrete Poincaré constant `1/λ_min` of `-Δ_h` with Dirichlet data,
/// by inverse power iteration.
pub fn poincare_constant(grid: &Grid) -> Result<f64> {
    let torsion = solve_torsion(grid)?;
    let mut x = torsion.phi.values.clone();
    let mut lambda_prev = f64::INFINITY;
    let mut y = vec![0.0; grid.len()];
    for _ in 0..200 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        y.iter_mut().for_each(|v| *v = 0.0);
        poisson_solve(grid, &x, &mut y, 1e-12)?;
        // Rayleigh quotient x·x / x·A⁻¹x
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let lambda = 1.0 / xy;
        std::mem::swap(&mut x, &mut y);
        if (lambda - lambda_prev).abs() <= 1e-13 * lambda {
            return Ok(1.0 / lambda);
        }
        lambda_prev = lambda;
    }
    Ok(1.0 / lambda_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::DoubleDouble;
    use proptest::prelude::*;

    fn square_series_centre(terms: usize) -> f64 {
        let pi = std::f64::consts::PI;
        let mut s = 0.0;
        for m in (1..terms).step_by(2) {
            for n in (1..terms).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                let sign = if ((m + n) / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * 16.0 / (pi.powi(4) * mf * nf * (mf * mf + nf * nf));
            }
        }
        s
    }

    #[test]
    fn interval_torsion_is_stencil_exact() {
        let g = Grid::unit_interval(201).unwrap();
        let t = solve_torsion(&g).unwrap();
        for k in 0..g.len() {
            let x = g.coord(k)[0];
            assert!((t.phi.values[k] - x * (1.0 - x) / 2.0).abs() <= 1e-10);
        }
        assert!((t.max_phi() - 0.125).abs() < 1e-12);
        assert_eq!(t.phi.values[0], 0.0);
        assert_eq!(t.phi.values[200], 0.0);
    }

    #[test]
    fn square_centre_matches_series() {
        let oracle = square_series_centre(401);
        assert!((oracle - 0.0736713).abs() < 1e-6);
        let g = Grid::new(2, &[1.0, 1.0], &[65, 65]).unwrap();
        let t = solve_torsion(&g).unwrap();
        let centre = t.phi.values[g.index(32, 32)];
        assert!((centre - oracle).abs() < 5e-4, "{centre} vs {oracle}");
        for k in g.interior() {
            assert!(t.phi.values[k] > 0.0);
        }
    }

    #[test]
    fn residual_is_below_tolerance() {
        let g = Grid::new(2, &[1.0, 2.0], &[17, 33]).unwrap();
        let t = solve_torsion(&g).unwrap();
        let lap = g.laplacian(&t.phi, 0.0);
        for k in g.interior() {
            assert!((lap.values[k] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn subdomain_interval() {
        let g = Grid::unit_interval(201).unwrap();
        let t = solve_torsion_subdomain(&g, 0.25).unwrap();
        for k in 0..g.len() {
            let x = g.coord(k)[0];
            let exact = if (0.25..=0.75).contains(&x) { (x - 0.25) * (0.75 - x) / 2.0 } else { 0.0 };
            assert!((t.phi.values[k] - exact).abs() < 1e-10);
        }
        // ∫ over an interval of length 1/2 is (1/2)³/12
        assert!((t.c_subdomain - 1.0 / 96.0).abs() < 1e-5);
        assert!(solve_torsion_subdomain(&g, 0.5).is_err());
    }

    #[test]
    fn subdomain_constant_grows_as_margin_shrinks() {
        let g = Grid::new(2, &[1.0, 1.0], &[33, 33]).unwrap();
        let mut prev = 0.0;
        for margin in [0.3, 0.2, 0.1, 0.0] {
            let c = solve_torsion_subdomain(&g, margin).unwrap().c_subdomain;
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn phi_weighted_sup_examples() {
        let g = Grid::unit_interval(101).unwrap();
        let t = solve_torsion(&g).unwrap();
        let v3 = t.phi.map(|p| 3.0 * p);
        assert!((phi_weighted_sup(&v3, &t) - 3.0).abs() < 1e-12);
        assert_eq!(phi_weighted_sup(&Field::constant(&g, 0.0), &t), 0.0);
        let v = Field::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        assert!((phi_weighted_sup(&v, &t) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn poincare_constant_matches_discrete_eigenvalue() {
        let g = Grid::unit_interval(101).unwrap();
        let h = g.spacing()[0];
        let lambda = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let cp = poincare_constant(&g).unwrap();
        assert!((cp * lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn double_double_torsion_is_tighter() {
        let g = Grid::unit_interval(101).unwrap();
        let t = solve_torsion_in::<DoubleDouble>(&g, 1e-28).unwrap();
        for k in 0..g.len() {
            let x = DoubleDouble::of(k as f64) / DoubleDouble::of(100.0);
            let exact = x * (DoubleDouble::of(1.0) - x) / DoubleDouble::of(2.0);
            assert!((t.phi.values[k] - exact).abs().to_f64_lossy() < 1e-25);
        }
    }

    proptest! {
        #[test]
        fn phi_weighted_sup_is_homogeneous(c in -50.0f64..50.0, seed in prop::collection::vec(0.0f64..1.0, 21)) {
            let g = Grid::unit_interval(21).unwrap();
            let t = solve_torsion(&g).unwrap();
            let v = Field::new(seed);
            let scaled = v.map(|x| c * x);
            let a = phi_weighted_sup(&scaled, &t);
            let b = c.abs() * phi_weighted_sup(&v, &t);
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }

        #[test]
        fn phi_weighted_sup_is_exact_for_binary_scalings(k in -20i32..20, neg in any::<bool>(), seed in prop::collection::vec(0.0f64..1.0, 21)) {
            let g = Grid::unit_interval(21).unwrap();
            let t = solve_torsion(&g).unwrap();
            let c = if neg { -(2f64).powi(k) } else { (2f64).powi(k) };
            let v = Field::new(seed);
            prop_assert_eq!(phi_weighted_sup(&v.map(|x| c * x), &t), c.abs() * phi_weighted_sup(&v, &t));
        }
    }
}
