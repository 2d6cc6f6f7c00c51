//! Ridge regression by conjugate gradient on the normal equations,
//! matrix-free.

use crate::error::{Error, Result};
use crate::linalg;
use crate::solvers::SolverControl;

#[derive(Debug, Clone)]
pub struct RidgeOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final normal-equation residual norm ||(B^T B + alpha I)s - B^T target||.
    pub residual_norm: f64,
    /// Set when alpha = 0 and CG hit a breakdown or the iteration cap,
    /// which indicates a rank-deficient (or near-deficient) operator.
    pub conditioning_warning: bool,
}

/// Minimizes `0.5*||target - B s||^2 + (alpha/2)*||s||^2` via CG on
/// `(B^T B + alpha I) s = B^T target`. With `alpha = 0` and a rank-deficient
/// operator the iteration still converges to the minimum-norm solution when
/// started from zero; a conditioning warning is flagged instead of failing.
pub fn ridge_solve<FA, FT>(
    apply: FA,
    adjoint: FT,
    target: &[f64],
    alpha: f64,
    control: &SolverControl,
    init: Option<&[f64]>,
) -> Result<RidgeOutcome>
where
    FA: Fn(&[f64]) -> Vec<f64>,
    FT: Fn(&[f64]) -> Vec<f64>,
{
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    if !linalg::all_finite(target) {
        return Err(Error::Input("target contains non-finite values".into()));
    }

    let b = adjoint(target);
    let dim = b.len();
    let normal_op = |x: &[f64]| -> Vec<f64> {
        let mut out = adjoint(&apply(x));
        if alpha != 0.0 {
            linalg::axpy(alpha, x, &mut out);
        }
        out
    };

    let b_norm = linalg::norm2(&b);
    let tol = control.rel_tol * b_norm;

    let mut x = match init {
        Some(x0) => {
            if x0.len() != dim {
                return Err(Error::dim("warm start", dim, x0.len()));
            }
            x0.to_vec()
        }
        None => vec![0.0; dim],
    };
    if b_norm == 0.0 {
        // Zero right-hand side: the minimum-norm / ridge solution is zero.
        return Ok(RidgeOutcome {
            solution: vec![0.0; dim],
            iterations: 0,
            residual_norm: 0.0,
            conditioning_warning: false,
        });
    }

    let mut r = linalg::sub(&b, &normal_op(&x));
    let mut p = r.clone();
    let mut rs = linalg::dot(&r, &r);
    let mut warning = false;
    let mut iterations = 0;

    for _ in 0..control.max_iters {
        if rs.sqrt() <= tol {
            break;
        }
        let ap = normal_op(&p);
        let pap = linalg::dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::Divergence("CG produced non-finite curvature".into()));
        }
        if pap <= f64::EPSILON * linalg::dot(&p, &p) {
            // Curvature collapsed: the search direction sits in (or near) the
            // null space. Only possible without regularization.
            warning = true;
            break;
        }
        let step = rs / pap;
        linalg::axpy(step, &p, &mut x);
        linalg::axpy(-step, &ap, &mut r);
        let rs_new = linalg::dot(&r, &r);
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
        iterations += 1;
    }

    let residual_norm = rs.sqrt();
    if residual_norm > tol && alpha == 0.0 {
        warning = true;
    }
    Ok(RidgeOutcome {
        solution: x,
        iterations,
        residual_norm,
        conditioning_warning: warning,
    })
}
