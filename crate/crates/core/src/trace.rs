//! Time series recorded by a run, and the field snapshots that accompany it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    /// Step size that produced this row; 0 on the initial row.
    pub dt: f64,
    /// Raw ∫u, including the ε floor.
    pub mass: f64,
    pub dirichlet_energy: f64,
    pub sup_norm: f64,
    /// ‖u − ε‖ weighted by the torsion function.
    pub phi_norm: f64,
    pub rho_eps_value: f64,
    pub floored_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub epsilon: f64,
    /// |Ω|.
    pub measure: f64,
    /// Blow-up threshold in force for the run; infinite when unknown.
    pub sup_cap: f64,
}

impl Trace {
    pub fn new(epsilon: f64, measure: f64, sup_cap: f64) -> Self {
        Trace { rows: Vec::new(), epsilon, measure, sup_cap }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mass_offset(&self) -> f64 {
        self.epsilon * self.measure
    }

    /// y − ε|Ω|.
    pub fn corrected_mass(&self, k: usize) -> f64 {
        self.rows[k].mass - self.mass_offset()
    }

    pub fn corrected_masses(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.corrected_mass(k)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.dirichlet_energy).collect()
    }

    /// Rows before the nonlocal cut-off saturates and before the sup norm
    /// reaches half the cap; the limit-problem identities are checked there.
    pub fn resolved_prefix(&self) -> usize {
        let half_cap = 0.5 * self.sup_cap;
        self.rows
            .iter()
            .position(|r| r.rho_eps_value < r.dirichlet_energy || r.sup_norm >= half_cap)
            .unwrap_or(self.rows.len())
    }

    /// Rows with sup norm below half the cap.
    pub fn pre_cap_prefix(&self) -> usize {
        let half_cap = 0.5 * self.sup_cap;
        self.rows.iter().position(|r| r.sup_norm >= half_cap).unwrap_or(self.rows.len())
    }

    pub fn prefix(&self, len: usize) -> Trace {
        Trace { rows: self.rows[..len.min(self.len())].to_vec(), ..self.clone_meta() }
    }

    fn clone_meta(&self) -> Trace {
        Trace { rows: Vec::new(), epsilon: self.epsilon, measure: self.measure, sup_cap: self.sup_cap }
    }

    /// Times strictly increasing and entries finite.
    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::Diagnostic(format!("trace time not increasing at row {}", k + 1)));
            }
        }
        Ok(())
    }
}

/// Nodal values at one instant, stored in `f64` whatever the run precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Index of the snapshot whose time is closest to `t`.
pub fn nearest_snapshot(snapshots: &[Snapshot], t: f64) -> Option<usize> {
    snapshots
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.t - t).abs().total_cmp(&(b.1.t - t).abs()))
        .map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, mass: f64, e: f64, sup: f64, rho: f64) -> TraceRow {
        TraceRow { t, dt: 0.1, mass, dirichlet_energy: e, sup_norm: sup, phi_norm: 0.0, rho_eps_value: rho, floored_nodes: 0 }
    }

    #[test]
    fn resolved_prefix_stops_at_saturation_or_half_cap() {
        let mut tr = Trace::new(0.1, 1.0, 10.0);
        tr.rows = vec![row(0.0, 1.0, 1.0, 1.0, 1.0), row(0.1, 1.0, 5.0, 2.0, 5.0), row(0.2, 1.0, 20.0, 3.0, 10.0)];
        assert_eq!(tr.resolved_prefix(), 2);
        tr.rows[2].rho_eps_value = 20.0;
        tr.rows[2].sup_norm = 6.0;
        assert_eq!(tr.resolved_prefix(), 2);
        assert_eq!(tr.pre_cap_prefix(), 2);
        tr.rows[2].sup_norm = 4.0;
        assert_eq!(tr.resolved_prefix(), 3);
        assert!((tr.corrected_mass(0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn nearest_snapshot_picks_closest_time() {
        let s: Vec<Snapshot> = [0.0, 0.5, 1.0].iter().map(|&t| Snapshot { t, values: vec![] }).collect();
        assert_eq!(nearest_snapshot(&s, 0.7), Some(1));
        assert_eq!(nearest_snapshot(&s, 0.8), Some(2));
        assert_eq!(nearest_snapshot(&[], 0.8), None);
    }
}
