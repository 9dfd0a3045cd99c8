//! Simulation and verification tools for the degenerate nonlocal equation
//! `u_t = u Δu + u ∫|∇u|²` with homogeneous Dirichlet data, approximated by
//! its ε-regularization, together with the replicator dynamics it descends from.

pub mod blowup;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod experiment;
pub mod initdata;
pub mod io;
pub mod mesh;
pub mod real;
pub mod replicator;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use mesh::{Field, Grid};
pub use real::{DoubleDouble, Precision, Real};
pub use solver::{Outcome, Scheme, SimulationResult, SolverParams};
pub use trace::{Snapshot, Trace, TraceRow};
