//! Discrete optimal transport: Wasserstein (node matching), Gromov-Wasserstein
//! (edge matching) and their convex combination used as an alignment loss.
//!
//! Transport plans are always treated as constants when differentiating; the
//! gradients in [`got`] hold both couplings fixed.

mod cost;
pub mod got;
mod gromov;
mod sinkhorn;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use cost::{cosine_cost_matrix, cosine_similarity_matrix, intra_similarity};
pub use got::{got, got_grad_features, got_loss, got_objective, GammaConvention, GotConfig, GotOutcome};
pub use gromov::{gw_contraction, gw_pseudo_cost, solve_gwd};
pub use sinkhorn::{round_to_marginals, solve_wd};

/// Tolerance used when validating that weights sum to one.
pub const MARGINAL_SUM_TOL: f64 = 1e-12;

/// Support points with nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    support: Matrix,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Matrix, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.rows() {
            return Err(Error::Dimension {
                op: "DiscreteDistribution::new",
                left: support.shape(),
                right: (weights.len(), 1),
            });
        }
        validate_marginal(&weights, "DiscreteDistribution::new")?;
        if let Some(row) = support.row_norms().iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroNorm {
                op: "DiscreteDistribution::new",
                row,
            });
        }
        Ok(Self { support, weights })
    }

    pub fn uniform(support: Matrix) -> Result<Self> {
        let n = support.rows();
        Self::new(support, uniform_weights(n))
    }

    pub fn support(&self) -> &Matrix {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    alloc::vec![1.0 / n as f64; n]
}

pub(crate) fn validate_marginal(w: &[f64], op: &'static str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::precondition(op, "empty marginal"));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::precondition(
            op,
            "marginal weights must be finite and nonnegative",
        ));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > MARGINAL_SUM_TOL * w.len().max(1) as f64 {
        return Err(Error::precondition(
            op,
            alloc::format!("marginal sums to {total}, expected 1"),
        ));
    }
    Ok(())
}

/// A nonnegative coupling with its prescribed marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub coupling: Matrix,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl TransportPlan {
    /// ∞-norm of the row and column marginal residuals.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.coupling.row_sums();
        let cols = self.coupling.col_sums();
        let r = rows
            .iter()
            .zip(&self.row_marginal)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let c = cols
            .iter()
            .zip(&self.col_marginal)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        r.max(c)
    }

    /// Shannon entropy `-Σ T_ij ln T_ij` of the coupling.
    pub fn entropy(&self) -> f64 {
        -self
            .coupling
            .data()
            .iter()
            .filter(|&&t| t > 0.0)
            .map(|&t| t * libm::log(t))
            .sum::<f64>()
    }

    /// For each column, the row holding the largest mass; ties go to the lowest row.
    pub fn column_argmax(&self) -> Vec<usize> {
        let t = &self.coupling;
        (0..t.cols())
            .map(|j| {
                let mut best = 0;
                for i in 1..t.rows() {
                    if t[(i, j)] > t[(best, j)] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WdSolver {
    /// Log-domain Sinkhorn on the entropically regularized problem.
    EntropicSinkhorn,
    /// Inexact proximal point iterations (KL proximity to the previous plan),
    /// converging toward the unregularized optimum.
    Ipot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GwInit {
    Uniform,
    /// Product coupling with relative noise of 1e-3, re-projected onto the marginals.
    Jittered {
        seed: u64,
    },
}

/// Per-entry structural discrepancy between two similarity values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructuralCost {
    /// `|a - b|`
    Absolute,
    /// `(a - b)²`, which admits the fast decomposition of the pseudo-cost.
    Squared,
}

impl StructuralCost {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            StructuralCost::Absolute => (a - b).abs(),
            StructuralCost::Squared => (a - b) * (a - b),
        }
    }

    /// Derivative with respect to `a`; the absolute value uses 0 at the kink.
    #[inline]
    pub fn deriv(self, a: f64, b: f64) -> f64 {
        match self {
            StructuralCost::Absolute => {
                if a > b {
                    1.0
                } else if a < b {
                    -1.0
                } else {
                    0.0
                }
            }
            StructuralCost::Squared => 2.0 * (a - b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtSolverConfig {
    pub wd_solver: WdSolver,
    /// Entropy weight for Sinkhorn, first proximal step size for IPOT.
    pub epsilon: f64,
    /// Scaling sweeps allowed per entropic solve.
    pub max_iter: usize,
    /// Marginal-violation threshold for declaring convergence.
    pub tol: f64,
    /// Proximal steps taken by IPOT.
    pub ipot_outer_iter: usize,
    pub gw_outer_iter: usize,
    pub gw_init: GwInit,
    pub gw_structural_cost: StructuralCost,
}

impl Default for OtSolverConfig {
    fn default() -> Self {
        Self {
            wd_solver: WdSolver::EntropicSinkhorn,
            epsilon: 0.05,
            max_iter: 500,
            tol: 1e-6,
            ipot_outer_iter: 14,
            gw_outer_iter: 20,
            gw_init: GwInit::Jittered { seed: 0 },
            gw_structural_cost: StructuralCost::Absolute,
        }
    }
}

impl OtSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(alloc::format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(alloc::format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 || self.ipot_outer_iter == 0 {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        Ok(())
    }
}
