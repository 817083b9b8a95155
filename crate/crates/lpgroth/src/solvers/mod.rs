//! Finite-N optimizers over vector spin configurations.
//!
//! All ascents are Armijo-backtracking gradient methods with a retraction
//! onto the constraint set. Restarts run in parallel; the best value wins
//! with ties broken by the lowest restart index.

mod constrained;
mod lagrangian;
mod overlap;
mod sphere;

pub use constrained::constrained_lagrangian;
pub use lagrangian::{
    derivative_relation_check, derivative_relation_family, lagrangian_family, lagrangian_max, lagrangian_max_seeded,
    lagrangian_search_radius, localized_lagrangian, localized_lagrangian_rescaled, DerivativeReport,
};
pub use overlap::{correct_overlap, correct_overlap_matrix, lift_to_positive, OverlapCorrection};
pub use sphere::{gse, gse_normalized, maximize_sphere, scalar_vector_equality_check, EqualityReport};

use crate::model::SpinConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Initial step as a fraction of the iterate's Euclidean norm.
    pub step0: f64,
    pub max_halvings: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Spend the first restarts on deterministic star-shaped seeds when the
    /// sphere exponent is below 2.
    pub structured_seeds: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 16,
            max_iter: 5000,
            step0: 0.1,
            max_halvings: 30,
            grad_tol: 1e-8,
            seed: 0,
            structured_seeds: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.restarts == 0 {
            return Err(crate::Error::Input("restarts must be at least 1".into()));
        }
        if !(self.step0 > 0.0) || !(self.grad_tol > 0.0) {
            return Err(crate::Error::Input("step0 and grad_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateResult {
    pub value: f64,
    pub config: SpinConfig,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Outcome of one ascent run.
#[derive(Debug, Clone)]
pub(crate) struct RunOutcome {
    pub value: f64,
    pub sigma: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Best run by value, lowest index on ties.
pub(crate) fn best_run(runs: Vec<RunOutcome>) -> (usize, RunOutcome) {
    let mut best: Option<(usize, RunOutcome)> = None;
    for (i, r) in runs.into_iter().enumerate() {
        let better = match &best {
            None => true,
            Some((_, b)) => r.value > b.value || (b.value.is_nan() && !r.value.is_nan()),
        };
        if better {
            best = Some((i, r));
        }
    }
    best.expect("at least one run")
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Σ_i ‖x_i‖₂^p` over rows of length `kappa`.
pub(crate) fn row_pow_sum(x: &[f64], kappa: usize, p: f64) -> f64 {
    x.chunks_exact(kappa)
        .map(|r| {
            let r2 = dot(r, r);
            if r2 == 0.0 {
                0.0
            } else {
                r2.powf(0.5 * p)
            }
        })
        .sum()
}
