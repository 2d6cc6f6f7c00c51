//! Convex subproblem solvers: sparse group LASSO and ridge regression, both
//! matrix-free against caller-supplied apply/adjoint closures.

mod prox;
mod proximal_gradient;
mod ridge;

pub use prox::{prox_group, prox_soft_threshold, prox_sparse_group};
pub use proximal_gradient::{
    check_sgl_optimality, lasso_solve, sparse_group_lasso_solve, SolveOutcome,
};
pub use ridge::{ridge_solve, RidgeOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the sparse group LASSO penalty: `lambda1` on the per-group
/// Euclidean norm, `lambda2` on the elementwise absolute values. Neither norm
/// is squared. `lambda2 = 0` is the plain group LASSO ablation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseGroupPenalty {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SparseGroupPenalty {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "penalty weights must be nonnegative, got lambda1={lambda1}, lambda2={lambda2}"
            )));
        }
        Ok(SparseGroupPenalty { lambda1, lambda2 })
    }

    /// Group-LASSO-only mode.
    pub fn group_only(lambda1: f64) -> Result<Self> {
        SparseGroupPenalty::new(lambda1, 0.0)
    }
}

/// How the proximal gradient step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// 1/L with L estimated by power iteration on the normal operator,
    /// falling back to halving whenever an ascent step is detected.
    FixedFromOperatorNorm,
    /// Halve from an initial guess until the majorization bound holds.
    Backtracking,
}

/// Iteration caps and stopping tolerances shared by the subproblem solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverControl {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_rule: StepRule,
}

impl SolverControl {
    pub fn new(max_iters: usize, rel_tol: f64, step_rule: StepRule) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be > 0, got {rel_tol}")));
        }
        Ok(SolverControl {
            max_iters,
            rel_tol,
            step_rule,
        })
    }
}

impl Default for SolverControl {
    fn default() -> Self {
        SolverControl {
            max_iters: 5000,
            rel_tol: 1e-6,
            step_rule: StepRule::FixedFromOperatorNorm,
        }
    }
}

/// A partition of the coefficient indices into contiguous groups, each with a
/// multiplier on the group-norm penalty weight (1 unless size weighting is
/// switched on).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    spans: Vec<(usize, usize)>,
    weights: Vec<f64>,
    dim: usize,
}

impl GroupPartition {
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        GroupPartition::contiguous_weighted(sizes, vec![1.0; sizes.len()])
    }

    pub fn contiguous_weighted(sizes: &[usize], weights: Vec<f64>) -> Result<Self> {
        if sizes.len() != weights.len() {
            return Err(Error::dim("group weights", sizes.len(), weights.len()));
        }
        let mut spans = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for (&len, &w) in sizes.iter().zip(&weights) {
            if len == 0 {
                return Err(Error::Config("empty coefficient group".into()));
            }
            if !(w > 0.0) {
                return Err(Error::Config(format!("group weight must be > 0, got {w}")));
            }
            spans.push((start, len));
            start += len;
        }
        Ok(GroupPartition {
            spans,
            weights,
            dim: start,
        })
    }

    pub fn singletons(dim: usize) -> Self {
        GroupPartition {
            spans: (0..dim).map(|i| (i, 1)).collect(),
            weights: vec![1.0; dim],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_count(&self) -> usize {
        self.spans.len()
    }

    pub fn span(&self, g: usize) -> (usize, usize) {
        self.spans[g]
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn slice<'a>(&self, g: usize, x: &'a [f64]) -> &'a [f64] {
        let (start, len) = self.spans[g];
        &x[start..start + len]
    }
}
