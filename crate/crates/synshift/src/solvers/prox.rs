//! Proximal operators of the sparse group LASSO penalty.

use crate::linalg;

/// Elementwise soft threshold: the prox of `tau * ||.||_1`.
pub fn prox_soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    x.iter()
        .map(|&v| v.signum() * (v.abs() - tau).max(0.0))
        .collect()
}

/// Block soft threshold: the prox of `tau * ||.||_2`. Zero inside the ball of
/// radius `tau`, a radial shrink outside it.
pub fn prox_group(x: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    let norm = linalg::norm2(x);
    if norm <= tau {
        vec![0.0; x.len()]
    } else {
        let scale = 1.0 - tau / norm;
        x.iter().map(|&v| scale * v).collect()
    }
}

/// Exact prox of `tau1 * ||.||_2 + tau2 * ||.||_1`: soft threshold first,
/// then the group shrink.
pub fn prox_sparse_group(x: &[f64], tau1: f64, tau2: f64) -> Vec<f64> {
    prox_group(&prox_soft_threshold(x, tau2), tau1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_definition() {
        assert_eq!(prox_soft_threshold(&[3.0, -0.5], 1.0), vec![2.0, 0.0]);
    }

    #[test]
    fn soft_threshold_tau_zero_is_identity() {
        let x = vec![0.25, -7.5, 0.0];
        assert_eq!(prox_soft_threshold(&x, 0.0), x);
    }

    #[test]
    fn soft_threshold_minimizes_scalar_objective() {
        // Each entry must beat a dense scalar grid for 0.5*(y-x)^2 + tau*|y|.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let tau: f64 = rng.gen_range(0.0..2.0);
            let y = prox_soft_threshold(&[x], tau)[0];
            let obj = |v: f64| 0.5 * (v - x).powi(2) + tau * v.abs();
            let best = (-4000..=4000)
                .map(|i| obj(i as f64 * 1e-3))
                .fold(f64::INFINITY, f64::min);
            assert!(obj(y) <= best + 1e-6, "x={x} tau={tau} y={y}");
        }
    }

    #[test]
    fn group_prox_inside_ball_is_zero() {
        let x = vec![0.3, 0.4]; // norm 0.5
        assert_eq!(prox_group(&x, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn group_prox_tau_zero_is_identity() {
        let x = vec![1.0, -2.0, 0.5];
        assert_eq!(prox_group(&x, 0.0), x);
    }

    #[test]
    fn group_prox_minimizes_over_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let tau: f64 = rng.gen_range(0.0..2.0);
            let y = prox_group(&x, tau);
            let obj = |v: &[f64]| {
                let diff: f64 = v.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                0.5 * diff + tau * crate::linalg::norm2(v)
            };
            let y_obj = obj(&y);
            for _ in 0..2000 {
                let cand: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.5..2.5)).collect();
                assert!(y_obj <= obj(&cand) + 1e-9);
            }
        }
    }

    #[test]
    fn composed_prox_beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let eta: f64 = rng.gen_range(0.1..2.0);
            let l1: f64 = rng.gen_range(0.0..1.5);
            let l2: f64 = rng.gen_range(0.0..1.5);
            let y = prox_sparse_group(&x, eta * l1, eta * l2);
            let obj = |v: &[f64]| {
                let diff: f64 = v.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                0.5 * diff
                    + eta * l1 * crate::linalg::norm2(v)
                    + eta * l2 * v.iter().map(|a| a.abs()).sum::<f64>()
            };
            let y_obj = obj(&y);
            for _ in 0..10_000 {
                let cand: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.5..2.5)).collect();
                assert!(y_obj <= obj(&cand) + 1e-9);
            }
        }
    }
}
