//! Proximal gradient solver for the per-task sparse group LASSO problem
//!
//!   min_c 0.5 * ||target - A c||^2 + sum_g w_g*lambda1*||c_g||_2 + lambda2*||c_g||_1
//!
//! and the plain l1 variant used in the testing phase. The operator `A` is
//! supplied as apply/adjoint closures and never materialized.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::solvers::{prox_sparse_group, GroupPartition, SolverControl, SparseGroupPenalty, StepRule};

/// Result of a proximal gradient solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub coeffs: Vec<f64>,
    /// Final objective value.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every accepted iteration, starting with the value at
    /// the initial point. Non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

fn penalty_value(c: &[f64], groups: &GroupPartition, penalty: &SparseGroupPenalty) -> f64 {
    let mut acc = 0.0;
    for g in 0..groups.group_count() {
        let block = groups.slice(g, c);
        acc += penalty.lambda1 * groups.weight(g) * linalg::norm2(block);
        acc += penalty.lambda2 * block.iter().map(|v| v.abs()).sum::<f64>();
    }
    acc
}

/// Largest eigenvalue of A^T A, estimated by power iteration from a fixed
/// deterministic start vector.
fn estimate_normal_operator_norm<FA, FT>(apply: &FA, adjoint: &FT, dim: usize) -> Result<f64>
where
    FA: Fn(&[f64]) -> Vec<f64>,
    FT: Fn(&[f64]) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = linalg::norm2(&v);
    if norm == 0.0 {
        return Ok(0.0);
    }
    linalg::scale(1.0 / norm, &mut v);
    let mut lambda = 0.0;
    for _ in 0..20 {
        let w = adjoint(&apply(&v));
        if w.len() != dim {
            return Err(Error::dim("adjoint output", dim, w.len()));
        }
        let norm = linalg::norm2(&w);
        if !norm.is_finite() {
            return Err(Error::Solver(
                "operator norm estimation produced non-finite values".into(),
            ));
        }
        if norm < 1e-300 {
            return Ok(0.0);
        }
        lambda = norm;
        v = w;
        linalg::scale(1.0 / lambda, &mut v);
    }
    Ok(lambda)
}

fn composed_prox(
    z: &[f64],
    eta: f64,
    groups: &GroupPartition,
    penalty: &SparseGroupPenalty,
) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    for g in 0..groups.group_count() {
        let (start, len) = groups.span(g);
        let block = prox_sparse_group(
            &z[start..start + len],
            eta * penalty.lambda1 * groups.weight(g),
            eta * penalty.lambda2,
        );
        out[start..start + len].copy_from_slice(&block);
    }
    out
}

/// Solves the sparse group LASSO problem by proximal gradient with the exact
/// composed prox (soft threshold, then group shrink). Monotone in the
/// objective: a step that would increase it triggers step halving.
pub fn sparse_group_lasso_solve<FA, FT>(
    apply: FA,
    adjoint: FT,
    groups: &GroupPartition,
    target: &[f64],
    penalty: &SparseGroupPenalty,
    control: &SolverControl,
    init: Option<&[f64]>,
) -> Result<SolveOutcome>
where
    FA: Fn(&[f64]) -> Vec<f64>,
    FT: Fn(&[f64]) -> Vec<f64>,
{
    if !linalg::all_finite(target) {
        return Err(Error::Input("target contains non-finite values".into()));
    }
    let dim = groups.dim();
    let mut c = match init {
        Some(c0) => {
            if c0.len() != dim {
                return Err(Error::dim("warm start", dim, c0.len()));
            }
            c0.to_vec()
        }
        None => vec![0.0; dim],
    };
    if dim == 0 {
        return Ok(SolveOutcome {
            coeffs: c,
            objective: 0.5 * linalg::dot(target, target),
            iterations: 0,
            objective_trace: vec![0.5 * linalg::dot(target, target)],
        });
    }

    let norm_sq = estimate_normal_operator_norm(&apply, &adjoint, dim)?;
    let mut eta = if norm_sq > 0.0 {
        1.0 / (1.02 * norm_sq)
    } else {
        1.0
    };

    let mut prediction = apply(&c);
    if prediction.len() != target.len() {
        return Err(Error::dim("operator output", target.len(), prediction.len()));
    }
    let mut residual = linalg::sub(&prediction, target);
    let mut objective = 0.5 * linalg::dot(&residual, &residual) + penalty_value(&c, groups, penalty);
    let mut trace = vec![objective];
    let mut iterations = 0;

    for _ in 0..control.max_iters {
        let grad = adjoint(&residual);
        if grad.len() != dim {
            return Err(Error::dim("adjoint output", dim, grad.len()));
        }

        // Step, with halving until the objective does not increase. In
        // backtracking mode we halve from a generous initial step instead of
        // trusting the power-method estimate.
        let mut step = match control.step_rule {
            StepRule::FixedFromOperatorNorm => eta,
            StepRule::Backtracking => eta * 8.0,
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut z = c.clone();
            linalg::axpy(-step, &grad, &mut z);
            let cand = composed_prox(&z, step, groups, penalty);
            let cand_prediction = apply(&cand);
            let cand_residual = linalg::sub(&cand_prediction, target);
            let cand_objective = 0.5 * linalg::dot(&cand_residual, &cand_residual)
                + penalty_value(&cand, groups, penalty);
            if !cand_objective.is_finite() {
                return Err(Error::Solver(
                    "objective became non-finite during proximal gradient".into(),
                ));
            }
            if cand_objective <= objective * (1.0 + 1e-15) + 1e-300 {
                accepted = Some((cand, cand_residual, cand_objective));
                break;
            }
            step *= 0.5;
        }
        let (cand, cand_residual, cand_objective) = accepted.ok_or_else(|| {
            Error::Solver("step-size estimation failure: no descent step found".into())
        })?;
        eta = step;
        iterations += 1;

        let change = objective - cand_objective;
        c = cand;
        residual = cand_residual;
        objective = cand_objective.min(objective);
        trace.push(objective);
        prediction.clear(); // silence unused warnings on the reused buffer
        if change.abs() <= control.rel_tol * objective.abs().max(1e-12) {
            break;
        }
    }

    Ok(SolveOutcome {
        coeffs: c,
        objective,
        iterations,
        objective_trace: trace,
    })
}

/// The plain l1-regularized least squares used in the testing phase: the same
/// machinery with singleton groups and no group weight.
pub fn lasso_solve<FA, FT>(
    apply: FA,
    adjoint: FT,
    target: &[f64],
    lambda: f64,
    control: &SolverControl,
    init: Option<&[f64]>,
    dim: usize,
) -> Result<SolveOutcome>
where
    FA: Fn(&[f64]) -> Vec<f64>,
    FT: Fn(&[f64]) -> Vec<f64>,
{
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let groups = GroupPartition::singletons(dim);
    let penalty = SparseGroupPenalty::new(0.0, lambda)?;
    sparse_group_lasso_solve(apply, adjoint, &groups, target, &penalty, control, init)
}

/// KKT residual of the sparse group LASSO problem at `coeffs`; near zero at
/// an optimum. For a zero group the certificate is how far the soft-
/// thresholded gradient sticks out of the lambda1 ball; for a nonzero group
/// it is the largest entry of the stationarity residual with the minimizing
/// l1 subgradient at zero entries.
pub fn check_sgl_optimality<FA, FT>(
    coeffs: &[f64],
    apply: FA,
    adjoint: FT,
    groups: &GroupPartition,
    target: &[f64],
    penalty: &SparseGroupPenalty,
) -> Result<f64>
where
    FA: Fn(&[f64]) -> Vec<f64>,
    FT: Fn(&[f64]) -> Vec<f64>,
{
    if coeffs.len() != groups.dim() {
        return Err(Error::dim("coefficients", groups.dim(), coeffs.len()));
    }
    let residual = linalg::sub(&apply(coeffs), target);
    let grad = adjoint(&residual);
    let mut worst: f64 = 0.0;
    for g in 0..groups.group_count() {
        let (start, len) = groups.span(g);
        let c_block = &coeffs[start..start + len];
        let g_block = &grad[start..start + len];
        let lambda1 = penalty.lambda1 * groups.weight(g);
        let block_norm = linalg::norm2(c_block);
        let violation = if block_norm == 0.0 {
            let shrunk = crate::solvers::prox_soft_threshold(g_block, penalty.lambda2);
            (linalg::norm2(&shrunk) - lambda1).max(0.0)
        } else {
            let mut v: f64 = 0.0;
            for (ci, gi) in c_block.iter().zip(g_block) {
                let r = if *ci != 0.0 {
                    gi + lambda1 * ci / block_norm + penalty.lambda2 * ci.signum()
                } else {
                    // Clamp the gradient into [-lambda2, lambda2]; the excess
                    // is the violation at a zero entry of a nonzero group.
                    gi.signum() * (gi.abs() - penalty.lambda2).max(0.0)
                };
                v = v.max(r.abs());
            }
            v
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense column-major test matrix with closures for apply/adjoint.
    pub(crate) struct DenseOp {
        pub rows: usize,
        pub cols: usize,
        pub data: Vec<f64>, // row-major
    }

    impl DenseOp {
        pub fn apply(&self, x: &[f64]) -> Vec<f64> {
            (0..self.rows)
                .map(|r| {
                    (0..self.cols)
                        .map(|c| self.data[r * self.cols + c] * x[c])
                        .sum()
                })
                .collect()
        }
        pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
            (0..self.cols)
                .map(|c| {
                    (0..self.rows)
                        .map(|r| self.data[r * self.cols + c] * y[r])
                        .sum()
                })
                .collect()
        }
    }

    fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseOp {
        DenseOp {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_target_with_group_penalty_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = random_dense(&mut rng, 8, 6);
        let groups = GroupPartition::contiguous(&[3, 3]).unwrap();
        let penalty = SparseGroupPenalty::new(0.5, 0.0).unwrap();
        let out = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &vec![0.0; 8],
            &penalty,
            &SolverControl::default(),
            None,
        )
        .unwrap();
        assert!(out.coeffs.iter().all(|&v| v == 0.0));
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn unregularized_square_system_reaches_least_squares() {
        // Well-conditioned square system: the lambda = 0 limit must match the
        // exact solve.
        let op = DenseOp {
            rows: 2,
            cols: 2,
            data: vec![2.0, 0.5, 0.5, 3.0],
        };
        let x_true = vec![1.25, -0.75];
        let target = op.apply(&x_true);
        let groups = GroupPartition::contiguous(&[2]).unwrap();
        let penalty = SparseGroupPenalty::new(0.0, 0.0).unwrap();
        let control = SolverControl {
            max_iters: 20_000,
            rel_tol: 1e-14,
            step_rule: StepRule::FixedFromOperatorNorm,
        };
        let out = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
            &control,
            None,
        )
        .unwrap();
        for (a, b) in out.coeffs.iter().zip(&x_true) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = random_dense(&mut rng, 12, 9);
        let target: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let groups = GroupPartition::contiguous(&[3, 3, 3]).unwrap();
        let penalty = SparseGroupPenalty::new(0.1, 0.1).unwrap();
        let out = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
            &SolverControl::default(),
            None,
        )
        .unwrap();
        for pair in out.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-15) + 1e-300);
        }
    }

    #[test]
    fn backtracking_mode_matches_fixed_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let op = random_dense(&mut rng, 10, 6);
        let target: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let groups = GroupPartition::contiguous(&[3, 3]).unwrap();
        let penalty = SparseGroupPenalty::new(0.05, 0.05).unwrap();
        let control_bt = SolverControl {
            step_rule: StepRule::Backtracking,
            ..SolverControl::default()
        };
        let a = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
            &SolverControl::default(),
            None,
        )
        .unwrap();
        let b = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
            &control_bt,
            None,
        )
        .unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-5 * a.objective.max(1.0));
    }

    #[test]
    fn rejects_non_finite_target() {
        let op = DenseOp {
            rows: 2,
            cols: 2,
            data: vec![1.0, 0.0, 0.0, 1.0],
        };
        let groups = GroupPartition::contiguous(&[2]).unwrap();
        let penalty = SparseGroupPenalty::new(0.1, 0.1).unwrap();
        let err = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &[f64::NAN, 1.0],
            &penalty,
            &SolverControl::default(),
            None,
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn lasso_null_threshold_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let op = random_dense(&mut rng, 10, 5);
        let target: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let null_threshold = linalg::norm_inf(&op.adjoint(&target));
        let out = lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &target,
            null_threshold * 1.01,
            &SolverControl::default(),
            None,
            5,
        )
        .unwrap();
        assert!(out.coeffs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lasso_lambda_zero_is_least_squares() {
        let op = DenseOp {
            rows: 3,
            cols: 2,
            data: vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        };
        let x_true = vec![0.5, -1.5];
        let target = op.apply(&x_true);
        let control = SolverControl {
            max_iters: 50_000,
            rel_tol: 1e-14,
            step_rule: StepRule::FixedFromOperatorNorm,
        };
        let out = lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &target,
            0.0,
            &control,
            None,
            2,
        )
        .unwrap();
        for (a, b) in out.coeffs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn kkt_zero_solution_with_huge_lambda1() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let op = random_dense(&mut rng, 8, 6);
        let target: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let groups = GroupPartition::contiguous(&[3, 3]).unwrap();
        let penalty = SparseGroupPenalty::new(1e6, 0.0).unwrap();
        let violation = check_sgl_optimality(
            &vec![0.0; 6],
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
        )
        .unwrap();
        assert_eq!(violation, 0.0);
    }

    #[test]
    fn kkt_small_at_converged_solution_and_grows_when_perturbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let op = random_dense(&mut rng, 14, 8);
        let target: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let groups = GroupPartition::contiguous(&[4, 4]).unwrap();
        let penalty = SparseGroupPenalty::new(0.2, 0.1).unwrap();
        let control = SolverControl {
            max_iters: 200_000,
            rel_tol: 1e-13,
            step_rule: StepRule::FixedFromOperatorNorm,
        };
        let out = sparse_group_lasso_solve(
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
            &control,
            None,
        )
        .unwrap();
        let at_opt = check_sgl_optimality(
            &out.coeffs,
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
        )
        .unwrap();
        assert!(at_opt <= 1e-5, "violation at optimum: {at_opt}");

        let perturbed: Vec<f64> = out.coeffs.iter().map(|v| v + 0.1).collect();
        let off_opt = check_sgl_optimality(
            &perturbed,
            |x| op.apply(x),
            |y| op.adjoint(y),
            &groups,
            &target,
            &penalty,
        )
        .unwrap();
        assert!(off_opt > at_opt);
    }
}
