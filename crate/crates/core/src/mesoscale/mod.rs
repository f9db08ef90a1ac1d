//! Volume-scaled jump process: Gillespie simulation, the truncated master
//! equation, stationary distributions and mesoscopic dissipation.

mod cme;
mod dissipation;
mod ssa;

use thiserror::Error;

pub use cme::{
    build_cme, check_markov_db, stationary_distribution, ClassFilter, MarkovDbReport, Stationary, TruncatedCME,
    DEFAULT_STATE_CAP,
};
pub use dissipation::{entropy_dissipation, evolve_cme, meso_to_macro_energy, Dissipation, Divergence};
pub use ssa::{ssa_ensemble, ssa_simulate, ssa_simulate_stream, EnsembleStats, JumpTrajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MesoError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("box holds {states} states, above the cap of {cap}")]
    CapExceeded { states: u128, cap: usize },
    #[error("generator is reducible: {count} strongly connected components (sizes {sizes:?})")]
    Reducible { count: usize, sizes: Vec<usize> },
    #[error("divergence is not convex near u = {at}")]
    NonConvex { at: f64 },
    #[error("distribution invalid: {0}")]
    BadDistribution(String),
}

/// Probability vector over the enumerated states of a truncated lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    pub p: Vec<f64>,
}

impl LatticeDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self, MesoError> {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MesoError::BadDistribution("entries must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MesoError::BadDistribution(format!("mass {total} differs from 1")));
        }
        Ok(Self { p })
    }

    /// Point mass on state index `i`.
    pub fn point(len: usize, i: usize) -> Self {
        let mut p = vec![0.0; len];
        p[i] = 1.0;
        Self { p }
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}
