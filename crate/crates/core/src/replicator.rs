//! Finite replicator dynamics and the Gaussian-kernel payoff whose steep
//! limit produces the diffusion term.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};

/// Dense `m × m` payoff matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    m: usize,
    a: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(Error::ShapeMismatch { expected: m * m, got: entries.len() });
        }
        if let Some(k) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: k });
        }
        Ok(PayoffMatrix { m, a: entries })
    }

    pub fn identity(m: usize) -> Self {
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            a[i * m + i] = 1.0;
        }
        PayoffMatrix { m, a }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn shifted(&self, c: f64) -> Self {
        PayoffMatrix { m: self.m, a: self.a.iter().map(|v| v + c).collect() }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.a[i * self.m..(i + 1) * self.m].iter().sum()
    }

    fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.a.chunks(self.m).map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Checks `p ≥ 0` and `Σp = 1` within 1e-9.
pub fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Precondition("empty strategy vector".into()));
    }
    if let Some(i) = p.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Precondition(format!("frequency {i} is negative or not finite")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("frequencies sum to {s}, not 1")));
    }
    Ok(())
}

/// `((Ap)_i − pᵀAp)·p_i`.
pub fn replicator_rhs(p: &[f64], a: &PayoffMatrix) -> Result<Vec<f64>> {
    if p.len() != a.m {
        return Err(Error::ShapeMismatch { expected: a.m, got: p.len() });
    }
    let ap = a.apply(p);
    let mean: f64 = p.iter().zip(&ap).map(|(x, y)| x * y).sum();
    Ok(p.iter().zip(&ap).map(|(x, y)| (y - mean) * x).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest total negative mass clipped in one step.
    pub max_clip: f64,
}

/// Largest clip a single step may need before the step size is rejected.
pub const MAX_CLIP: f64 = 1e-6;

/// RK4 with clipping of negative components and renormalization after
/// every step.
pub fn integrate_replicator(p0: &[f64], a: &PayoffMatrix, t_end: f64, dt: f64) -> Result<ReplicatorTrace> {
    check_simplex(p0)?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and t_end >= 0, got {dt} and {t_end}")));
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut p = p0.to_vec();
    let mut trace = ReplicatorTrace { times: vec![0.0], states: vec![p.clone()], max_clip: 0.0 };
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for n in 0..steps {
        let t = n as f64 * dt;
        let h = dt.min(t_end - t);
        let k1 = replicator_rhs(&p, a)?;
        let k2 = replicator_rhs(&axpy(&p, &k1, 0.5 * h), a)?;
        let k3 = replicator_rhs(&axpy(&p, &k2, 0.5 * h), a)?;
        let k4 = replicator_rhs(&axpy(&p, &k3, h), a)?;
        let mut next: Vec<f64> = (0..p.len()).map(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let clip: f64 = next.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        if clip > MAX_CLIP {
            return Err(Error::SimplexClip(clip));
        }
        trace.max_clip = trace.max_clip.max(clip);
        next.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        p = next;
        trace.times.push(t + h);
        trace.states.push(p.clone());
    }
    Ok(trace)
}

fn gaussian(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// `a_ij = h·G_σ(x_i − x_j)` on the nodes of a one-dimensional grid.
pub fn payoff_matrix_from_kernel(grid: &Grid, sigma: f64) -> Result<PayoffMatrix> {
    if grid.dimension() != 1 {
        return Err(Error::InvalidGrid("kernel payoff needs a one-dimensional grid".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Precondition(format!("sigma must be positive, got {sigma}")));
    }
    let n = grid.len();
    let h = grid.spacing()[0];
    let x: Vec<f64> = (0..n).map(|k| grid.coord(k)[0]).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = h * gaussian(x[i] - x[j], sigma);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    Ok(PayoffMatrix { m: n, a })
}

/// `max |(2/σ²)(G_σ * u − u) − Δ_h u|` over nodes at least 5σ from the
/// boundary. The convolution at a node uses the kernel payoff row restricted
/// to a window symmetric about the node and renormalized, so one-sided
/// truncation does not leak a first moment.
pub fn kernel_laplacian_consistency(grid: &Grid, u: &Field, sigma: f64) -> Result<f64> {
    grid.check_len(&u.values)?;
    let h = grid.spacing()[0];
    if sigma < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("sigma {sigma} is below two grid spacings")));
    }
    let a = payoff_matrix_from_kernel(grid, sigma)?;
    let n = grid.len();
    let lap = grid.laplacian(u, 0.0);
    let mut defect: f64 = 0.0;
    let mut any = false;
    for k in grid.interior() {
        if grid.boundary_distance(k) < 5.0 * sigma - 1e-12 {
            continue;
        }
        any = true;
        let reach = k.min(n - 1 - k);
        let (mut mass, mut acc) = (0.0, 0.0);
        for j in k - reach..=k + reach {
            mass += a.get(k, j);
            acc += a.get(k, j) * (u.values[j] - u.values[k]);
        }
        let scaled = 2.0 / (sigma * sigma) * (acc / mass);
        defect = defect.max((scaled - lap.values[k]).abs());
    }
    if !any {
        return Err(Error::Precondition(format!("no node lies 5σ = {} from the boundary", 5.0 * sigma)));
    }
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rhs_examples() {
        let a = PayoffMatrix::identity(2);
        assert_eq!(replicator_rhs(&[0.5, 0.5], &a).unwrap(), vec![0.0, 0.0]);
        assert_eq!(replicator_rhs(&[0.75, 0.25], &a).unwrap(), vec![0.09375, -0.09375]);
        assert!(replicator_rhs(&[1.0], &a).is_err());
    }

    #[test]
    fn constant_game_is_stationary() {
        let a = PayoffMatrix::new(3, vec![2.0; 9]).unwrap();
        let p0 = [1.0 / 3.0; 3];
        let tr = integrate_replicator(&p0, &a, 1.0, 0.01).unwrap();
        assert!(tr.states.iter().all(|s| s.iter().zip(&p0).all(|(x, y)| (x - y).abs() < 1e-15)));
    }

    /// Inverse of `t = F(p) − F(p0)` with `F(p) = 2 ln(2p − 1) − ln p − ln(1 − p)`,
    /// the closed-form solution of `p′ = p(1 − p)(2p − 1)` for `p > ½`.
    fn coordination_oracle(p0: f64, t: f64) -> f64 {
        let f = |p: f64| 2.0 * (2.0 * p - 1.0).ln() - p.ln() - (1.0 - p).ln();
        let target = f(p0) + t;
        let (mut lo, mut hi) = (p0, 1.0 - 1e-16);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target { lo = mid } else { hi = mid }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn coordination_game_matches_scalar_oracle() {
        let a = PayoffMatrix::identity(2);
        let tr = integrate_replicator(&[0.6, 0.4], &a, 10.0, 0.01).unwrap();
        let mut prev = 0.0;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - coordination_oracle(0.6, *t)).abs() < 1e-4, "t = {t}");
            assert!(s[0] >= prev);
            prev = s[0];
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn large_steps_are_rejected() {
        let a = PayoffMatrix::new(2, vec![0.0, 50.0, 0.0, 0.0]).unwrap();
        assert!(matches!(integrate_replicator(&[0.01, 0.99], &a, 1.0, 0.5), Err(Error::SimplexClip(_))));
    }

    #[test]
    fn kernel_payoff_examples() {
        let g = Grid::unit_interval(201).unwrap();
        let sigma = 0.05;
        let a = payoff_matrix_from_kernel(&g, sigma).unwrap();
        let diag = g.spacing()[0] / (sigma * (2.0 * PI).sqrt());
        for i in 0..a.size() {
            assert!((a.get(i, i) - diag).abs() <= 1e-15 * diag);
            for j in 0..a.size() {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
        let mid = 100;
        assert!(a.row_sum(mid) >= 0.999);
        assert!(a.row_sum(0) < 0.6);
    }

    #[test]
    fn kernel_defect_vanishes_on_affine_fields() {
        let g = Grid::unit_interval(401).unwrap();
        let u = Field::from_fn(&g, |x| 2.0 * x[0] + 0.3);
        assert!(kernel_laplacian_consistency(&g, &u, 0.05).unwrap() <= 1e-8);
        assert!(kernel_laplacian_consistency(&g, &u, 0.001).is_err());
    }

    #[test]
    fn kernel_defect_follows_the_moment_expansion() {
        // (2/σ²)(G*u − u) − u″ = (σ²/4)u⁗ + O(σ⁴); for sin(πx) that is π⁴σ²/4.
        let g = Grid::unit_interval(801).unwrap();
        let u = Field::from_fn(&g, |x| (PI * x[0]).sin());
        let d1 = kernel_laplacian_consistency(&g, &u, 0.05).unwrap();
        let bound = PI.powi(4) * 0.05f64.powi(2) / 4.0;
        assert!(d1 <= 2.0 * bound && d1 >= 0.5 * bound, "{d1} vs {bound}");
        let d2 = kernel_laplacian_consistency(&g, &u, 0.025).unwrap();
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn rhs_is_tangent_to_the_simplex(p in simplex(5), entries in prop::collection::vec(-3.0f64..3.0, 25)) {
            let a = PayoffMatrix::new(5, entries).unwrap();
            let s: f64 = replicator_rhs(&p, &a).unwrap().iter().sum();
            prop_assert!(s.abs() < 1e-14);
        }

        #[test]
        fn integration_stays_on_the_simplex(p in simplex(4), entries in prop::collection::vec(-2.0f64..2.0, 16)) {
            let a = PayoffMatrix::new(4, entries).unwrap();
            let tr = integrate_replicator(&p, &a, 2.0, 0.01).unwrap();
            for s in &tr.states {
                prop_assert!(s.iter().all(|&v| v >= 0.0));
                prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn payoff_shift_is_exact_on_dyadic_games(
            num in prop::collection::vec(0u32..6, 3),
            entries in prop::collection::vec(-8i32..8, 16),
            k in -3i32..4,
        ) {
            // Dyadic frequencies, small integer payoffs and a power-of-two
            // shift keep every operation exact.
            let last = 16 - num.iter().sum::<u32>();
            let p: Vec<f64> = num.iter().chain([&last]).map(|&v| v as f64 / 16.0).collect();
            let a = PayoffMatrix::new(4, entries.iter().map(|&v| v as f64).collect()).unwrap();
            let c = 2f64.powi(k);
            prop_assert_eq!(replicator_rhs(&p, &a).unwrap(), replicator_rhs(&p, &a.shifted(c)).unwrap());
        }

        #[test]
        fn payoff_shift_is_invariant_to_roundoff(p in simplex(5), entries in prop::collection::vec(-3.0f64..3.0, 25), c in -10.0f64..10.0) {
            let a = PayoffMatrix::new(5, entries).unwrap();
            let r0 = replicator_rhs(&p, &a).unwrap();
            let r1 = replicator_rhs(&p, &a.shifted(c)).unwrap();
            for (x, y) in r0.iter().zip(&r1) {
                prop_assert!((x - y).abs() < 1e-13);
            }
        }
    }
}
