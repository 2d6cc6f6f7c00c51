//! Testing-phase reconstruction: build the bank of shifted synergies, thin
//! out collinear columns, smooth, then fit unseen movements by l1-regularized
//! least squares and score the normalized reconstruction error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::savitzky_golay;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{apply_shift, ShiftPlan, SynergyBank, VelocityDataset};
use crate::solvers::{lasso_solve, SolverControl};

/// The bank of time-shifted active synergies: one column per (synergy,
/// shift), synergy-major then shift-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyBankMatrix {
    columns: Vec<Vec<f64>>,
    labels: Vec<(usize, usize)>,
    n: usize,
    t_test: usize,
}

impl SynergyBankMatrix {
    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    /// (synergy index, shift) per column.
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn joint_count(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> usize {
        self.t_test
    }

    pub fn apply(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.columns.len() {
            return Err(Error::dim("bank coefficients", self.columns.len(), coeffs.len()));
        }
        let mut out = vec![0.0; self.n * self.t_test];
        for (c, col) in coeffs.iter().zip(&self.columns) {
            if *c != 0.0 {
                linalg::axpy(*c, col, &mut out);
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self, residual: &[f64]) -> Result<Vec<f64>> {
        if residual.len() != self.n * self.t_test {
            return Err(Error::dim("bank residual", self.n * self.t_test, residual.len()));
        }
        Ok(self
            .columns
            .iter()
            .map(|col| linalg::dot(col, residual))
            .collect())
    }
}

/// One column per (active synergy, shift) over the testing window, in
/// canonical synergy-major order; under that ordering bank-times-coefficients
/// reproduces the training-phase forward model.
pub fn build_bank(bank: &SynergyBank, t_test: usize, plan: &ShiftPlan) -> Result<SynergyBankMatrix> {
    if bank.template_len() > t_test {
        return Err(Error::Config(format!(
            "template length {} exceeds testing window {}",
            bank.template_len(),
            t_test
        )));
    }
    if plan.window() != t_test {
        return Err(Error::dim("bank plan window", t_test, plan.window()));
    }
    if plan.synergy_count() != bank.synergy_count() {
        return Err(Error::dim(
            "bank plan synergies",
            bank.synergy_count(),
            plan.synergy_count(),
        ));
    }
    if plan.template_len() != bank.template_len() {
        return Err(Error::dim(
            "bank plan template length",
            bank.template_len(),
            plan.template_len(),
        ));
    }
    let n = bank.joint_count();
    let t_s = bank.template_len();
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for j in bank.active_indices() {
        for &shift in plan.shifts(j) {
            columns.push(apply_shift(bank.template(j), shift, n, t_test, t_s)?);
            labels.push((j, shift));
        }
    }
    Ok(SynergyBankMatrix {
        columns,
        labels,
        n,
        t_test,
    })
}

/// Absolute Pearson correlation of two columns; zero-variance columns are
/// treated as uncorrelated.
fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / len;
    let mean_b = b.iter().sum::<f64>() / len;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    (cov / (var_a.sqrt() * var_b.sqrt())).abs()
}

/// Greedy keep-first pass in canonical order: a column survives iff its
/// absolute Pearson correlation with every previously kept column is <= tau.
pub fn prune_correlated(bank: &SynergyBankMatrix, tau: f64) -> Result<SynergyBankMatrix> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must be in [0, 1], got {tau}")));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (col, label) in bank.columns.iter().zip(&bank.labels) {
        if columns.iter().all(|kept| abs_correlation(kept, col) <= tau) {
            columns.push(col.clone());
            labels.push(*label);
        }
    }
    Ok(SynergyBankMatrix {
        columns,
        labels,
        n: bank.n,
        t_test: bank.t_test,
    })
}

/// Smooths each column with a Savitzky-Golay filter applied per joint
/// segment, never across joint boundaries. Columns are time-major, so each
/// joint's series is gathered at stride `n`.
pub fn smooth_bank(
    bank: &SynergyBankMatrix,
    window: usize,
    polyorder: usize,
) -> Result<SynergyBankMatrix> {
    let n = bank.n;
    let t = bank.t_test;
    let mut columns = Vec::with_capacity(bank.columns.len());
    for col in &bank.columns {
        let mut smoothed = vec![0.0; col.len()];
        for i in 0..n {
            let series: Vec<f64> = (0..t).map(|s| col[s * n + i]).collect();
            let out = savitzky_golay(&series, window, polyorder)?;
            for (s, v) in out.into_iter().enumerate() {
                smoothed[s * n + i] = v;
            }
        }
        columns.push(smoothed);
    }
    Ok(SynergyBankMatrix {
        columns,
        labels: bank.labels.clone(),
        n,
        t_test: t,
    })
}

/// Squared reconstruction error divided by the signal energy. Defined as 0
/// when both signals are zero; a zero signal against a nonzero
/// reconstruction is a degenerate input.
pub fn normalized_error(v: &[f64], v_hat: &[f64]) -> Result<f64> {
    if v.len() != v_hat.len() {
        return Err(Error::dim("reconstruction", v.len(), v_hat.len()));
    }
    let denominator = linalg::dot(v, v);
    if denominator == 0.0 {
        return if v_hat.iter().all(|&x| x == 0.0) {
            Ok(0.0)
        } else {
            Err(Error::Degenerate(
                "normalized error of a zero signal against a nonzero reconstruction".into(),
            ))
        };
    }
    let numerator: f64 = v
        .iter()
        .zip(v_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(numerator / denominator)
}

/// One testing-phase reconstruction.
#[derive(Debug, Clone)]
pub struct GestureRecon {
    pub coeffs: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub error: f64,
}

/// Fits one gesture against the (already pruned and smoothed) bank by the
/// l1-regularized least squares and reports the normalized error.
pub fn reconstruct_gesture(
    bank: &SynergyBankMatrix,
    v_test: &[f64],
    lambda_test: f64,
    control: &SolverControl,
) -> Result<GestureRecon> {
    if v_test.len() != bank.n * bank.t_test {
        return Err(Error::dim("test gesture", bank.n * bank.t_test, v_test.len()));
    }
    let outcome = lasso_solve(
        |c| bank.apply(c).expect("validated dimensions"),
        |r| bank.adjoint(r).expect("validated dimensions"),
        v_test,
        lambda_test,
        control,
        None,
        bank.column_count(),
    )?;
    let v_hat = bank.apply(&outcome.coeffs)?;
    let error = normalized_error(v_test, &v_hat)?;
    Ok(GestureRecon {
        coeffs: outcome.coeffs,
        v_hat,
        error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: usize,
    pub error: f64,
    pub nnz_coeffs: usize,
}

/// Evaluation summary over a test dataset. Mean and standard deviation are
/// absent for an empty test set; the deviation is the population one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task: Vec<TaskRecord>,
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    pub columns_total: usize,
    pub columns_kept: usize,
    pub m_active: usize,
}

/// Full testing pass: build the bank once, prune, optionally smooth, then
/// reconstruct every gesture (in parallel, merged by task index).
pub fn evaluate_suite(
    bank: &SynergyBank,
    dataset_test: &VelocityDataset,
    lambda_test: f64,
    tau: f64,
    filter_params: Option<(usize, usize)>,
    control: &SolverControl,
) -> Result<(EvalReport, Vec<GestureRecon>)> {
    if dataset_test.joint_count() != bank.joint_count() {
        return Err(Error::dim(
            "test dataset joints",
            bank.joint_count(),
            dataset_test.joint_count(),
        ));
    }
    let t_test = dataset_test.window();
    let plan = ShiftPlan::full(t_test, bank.template_len(), bank.synergy_count())?;
    let full = build_bank(bank, t_test, &plan)?;
    let columns_total = full.column_count();
    let pruned = prune_correlated(&full, tau)?;
    let columns_kept = pruned.column_count();
    let prepared = match filter_params {
        Some((window, polyorder)) => smooth_bank(&pruned, window, polyorder)?,
        None => pruned,
    };

    let recons: Vec<GestureRecon> = (0..dataset_test.task_count())
        .into_par_iter()
        .map(|g| reconstruct_gesture(&prepared, dataset_test.task(g), lambda_test, control))
        .collect::<Result<_>>()?;

    let per_task: Vec<TaskRecord> = recons
        .iter()
        .enumerate()
        .map(|(g, r)| TaskRecord {
            task_id: g + 1,
            error: r.error,
            nnz_coeffs: r.coeffs.iter().filter(|&&c| c != 0.0).count(),
        })
        .collect();
    let (mean_error, std_error) = if per_task.is_empty() {
        (None, None)
    } else {
        let mean = per_task.iter().map(|r| r.error).sum::<f64>() / per_task.len() as f64;
        let var = per_task
            .iter()
            .map(|r| (r.error - mean).powi(2))
            .sum::<f64>()
            / per_task.len() as f64;
        (Some(mean), Some(var.sqrt()))
    };
    Ok((
        EvalReport {
            per_task,
            mean_error,
            std_error,
            columns_total,
            columns_kept,
            m_active: bank.active_count(),
        },
        recons,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_bank(n: usize, t_s: usize, m: usize, seed: u64) -> SynergyBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let templates: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let mut tpl: Vec<f64> = (0..n * t_s).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = linalg::norm2(&tpl);
                linalg::scale(1.0 / norm, &mut tpl);
                tpl
            })
            .collect();
        SynergyBank::new(n, t_s, templates).unwrap()
    }

    #[test]
    fn single_synergy_equal_window_is_the_template() {
        let bank = unit_bank(2, 5, 1, 1);
        let plan = ShiftPlan::full(5, 5, 1).unwrap();
        let matrix = build_bank(&bank, 5, &plan).unwrap();
        assert_eq!(matrix.column_count(), 1);
        let expected = apply_shift(bank.template(0), 0, 2, 5, 5).unwrap();
        assert_eq!(matrix.column(0), expected.as_slice());
    }

    #[test]
    fn paper_scale_bank_dimensions() {
        // m_final=7 active of 10, n=10, T_test=86, T_s=39: 7 x 48 columns of
        // length 860.
        let mut bank = unit_bank(10, 39, 10, 2);
        for j in 7..10 {
            bank.set_active(j, false);
        }
        let plan = ShiftPlan::full(86, 39, 10).unwrap();
        let matrix = build_bank(&bank, 86, &plan).unwrap();
        assert_eq!(matrix.column_count(), 7 * 48);
        assert_eq!(matrix.column(0).len(), 860);
    }

    #[test]
    fn bank_times_unit_vector_is_the_labeled_column() {
        let bank = unit_bank(2, 4, 2, 3);
        let plan = ShiftPlan::full(9, 4, 2).unwrap();
        let matrix = build_bank(&bank, 9, &plan).unwrap();
        let col = 7;
        let (j, shift) = matrix.labels()[col];
        let mut e = vec![0.0; matrix.column_count()];
        e[col] = 1.0;
        let out = matrix.apply(&e).unwrap();
        let expected = apply_shift(bank.template(j), shift, 2, 9, 4).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn build_bank_rejects_template_longer_than_window() {
        let bank = unit_bank(2, 6, 1, 4);
        let plan = ShiftPlan::full(6, 6, 1).unwrap();
        assert!(build_bank(&bank, 5, &plan).is_err());
        assert!(matches!(
            build_bank(&bank, 4, &ShiftPlan::full(4, 4, 1).unwrap()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identical_columns_are_pruned() {
        let bank = SynergyBankMatrix {
            columns: vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]],
            labels: vec![(0, 0), (0, 1)],
            n: 1,
            t_test: 3,
        };
        let pruned = prune_correlated(&bank, 0.8).unwrap();
        assert_eq!(pruned.column_count(), 1);
        assert_eq!(pruned.labels(), &[(0, 0)]);
    }

    #[test]
    fn orthogonal_columns_are_kept() {
        let bank = SynergyBankMatrix {
            columns: vec![
                vec![1.0, -1.0, 1.0, -1.0],
                vec![1.0, 1.0, -1.0, -1.0],
                vec![1.0, -1.0, -1.0, 1.0],
            ],
            labels: vec![(0, 0), (0, 1), (0, 2)],
            n: 1,
            t_test: 4,
        };
        let pruned = prune_correlated(&bank, 0.8).unwrap();
        assert_eq!(pruned.column_count(), 3);
    }

    #[test]
    fn pruned_bank_has_no_correlated_pair_and_is_idempotent() {
        let bank_src = unit_bank(2, 5, 3, 5);
        let plan = ShiftPlan::full(12, 5, 3).unwrap();
        let matrix = build_bank(&bank_src, 12, &plan).unwrap();
        let pruned = prune_correlated(&matrix, 0.8).unwrap();
        for i in 0..pruned.column_count() {
            for k in 0..i {
                let corr = abs_correlation(pruned.column(i), pruned.column(k));
                assert!(corr <= 0.8 + 1e-12, "columns {k},{i} correlate at {corr}");
            }
        }
        let again = prune_correlated(&pruned, 0.8).unwrap();
        assert_eq!(again.column_count(), pruned.column_count());
        // Kept labels are a subsequence of the originals.
        let mut it = matrix.labels().iter();
        for label in pruned.labels() {
            assert!(it.any(|l| l == label));
        }
    }

    #[test]
    fn smoothing_preserves_constants_and_reduces_roughness() {
        let constant = SynergyBankMatrix {
            columns: vec![vec![2.5; 20]],
            labels: vec![(0, 0)],
            n: 2,
            t_test: 10,
        };
        let smooth = smooth_bank(&constant, 5, 2).unwrap();
        for (a, b) in smooth.column(0).iter().zip(constant.column(0)) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 2;
        let t = 40;
        let noisy: Vec<f64> = (0..n * t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bank = SynergyBankMatrix {
            columns: vec![noisy],
            labels: vec![(0, 0)],
            n,
            t_test: t,
        };
        let smooth = smooth_bank(&bank, 9, 2).unwrap();
        let roughness = |col: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..n {
                for s in 1..t - 1 {
                    let second =
                        col[(s + 1) * n + i] - 2.0 * col[s * n + i] + col[(s - 1) * n + i];
                    acc += second * second;
                }
            }
            acc
        };
        assert!(roughness(smooth.column(0)) < roughness(bank.column(0)));
    }

    #[test]
    fn smoothing_keeps_per_joint_polynomials_in_the_interior() {
        let n = 2;
        let t = 20;
        let mut col = vec![0.0; n * t];
        for s in 0..t {
            let x = s as f64;
            col[s * n] = 1.0 + 0.5 * x - 0.02 * x * x;
            col[s * n + 1] = -2.0 + 0.1 * x * x;
        }
        let bank = SynergyBankMatrix {
            columns: vec![col.clone()],
            labels: vec![(0, 0)],
            n,
            t_test: t,
        };
        let smooth = smooth_bank(&bank, 7, 2).unwrap();
        for s in 3..t - 3 {
            for i in 0..n {
                assert!((smooth.column(0)[s * n + i] - col[s * n + i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalized_error_definition_and_properties() {
        let v = vec![1.0, -2.0, 3.0];
        assert_eq!(normalized_error(&v, &v).unwrap(), 0.0);
        assert_eq!(normalized_error(&v, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(normalized_error(&[0.0; 3], &[0.0; 3]).unwrap(), 0.0);
        assert!(matches!(
            normalized_error(&[0.0; 3], &[1.0, 0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        // Scale invariance.
        let v_hat = vec![0.5, -1.0, 2.0];
        let base = normalized_error(&v, &v_hat).unwrap();
        let scaled_v: Vec<f64> = v.iter().map(|x| x * -3.5).collect();
        let scaled_hat: Vec<f64> = v_hat.iter().map(|x| x * -3.5).collect();
        assert!((normalized_error(&scaled_v, &scaled_hat).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn planted_column_is_recovered() {
        let bank_src = unit_bank(2, 5, 2, 10);
        let plan = ShiftPlan::full(12, 5, 2).unwrap();
        let matrix = build_bank(&bank_src, 12, &plan).unwrap();
        let target_col = 3;
        let v_test = matrix.column(target_col).to_vec();
        let out = reconstruct_gesture(&matrix, &v_test, 1e-4, &SolverControl::default()).unwrap();
        assert!(out.error <= 0.01, "error {}", out.error);
        let best = out
            .coeffs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(best, target_col);
    }

    #[test]
    fn lambda_above_null_threshold_gives_zero_and_unit_error() {
        let bank_src = unit_bank(2, 5, 2, 11);
        let plan = ShiftPlan::full(12, 5, 2).unwrap();
        let matrix = build_bank(&bank_src, 12, &plan).unwrap();
        let v_test: Vec<f64> = (0..24).map(|i| ((i as f64) * 0.3).cos()).collect();
        let threshold = linalg::norm_inf(&matrix.adjoint(&v_test).unwrap());
        let out =
            reconstruct_gesture(&matrix, &v_test, threshold * 1.01, &SolverControl::default())
                .unwrap();
        assert!(out.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(out.error, 1.0);
    }

    #[test]
    fn zero_gesture_has_zero_error_by_convention() {
        let bank_src = unit_bank(2, 5, 2, 12);
        let plan = ShiftPlan::full(12, 5, 2).unwrap();
        let matrix = build_bank(&bank_src, 12, &plan).unwrap();
        let out =
            reconstruct_gesture(&matrix, &vec![0.0; 24], 0.1, &SolverControl::default()).unwrap();
        assert!(out.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(out.error, 0.0);
    }

    #[test]
    fn error_is_non_increasing_as_lambda_decreases() {
        let bank_src = unit_bank(2, 5, 3, 13);
        let plan = ShiftPlan::full(14, 5, 3).unwrap();
        let matrix = build_bank(&bank_src, 14, &plan).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let v_test: Vec<f64> = (0..28).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let control = SolverControl {
            rel_tol: 1e-10,
            ..SolverControl::default()
        };
        let mut last = f64::INFINITY;
        for lambda in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let out = reconstruct_gesture(&matrix, &v_test, lambda, &control).unwrap();
            assert!(out.error <= last + 1e-6, "{} after {}", out.error, last);
            last = out.error;
        }
    }

    #[test]
    fn evaluate_suite_self_consistency_on_noiseless_data() {
        let plan = ShiftPlan::full(16, 6, 3).unwrap();
        let spec = SyntheticSpec {
            m_true: 3,
            active_shifts_per_task: 2,
            snr_db: None,
            amplitude_range: (0.5, 1.5),
            seed: 21,
        };
        let (data, bank, _) = generate_synthetic(&spec, 2, 16, 6, 6, &plan).unwrap();
        let (report, recons) = evaluate_suite(
            &bank,
            &data,
            1e-5,
            1.0, // keep every column so the planted activations stay representable
            None,
            &SolverControl::default(),
        )
        .unwrap();
        assert_eq!(report.per_task.len(), 6);
        assert_eq!(recons.len(), 6);
        assert!(
            report.mean_error.unwrap() <= 0.05,
            "mean error {:?}",
            report.mean_error
        );
        assert_eq!(report.m_active, 3);
        assert_eq!(report.columns_total, 3 * 11);
    }

    #[test]
    fn evaluate_suite_empty_test_set_flags_undefined_mean() {
        let bank = unit_bank(2, 5, 2, 22);
        let empty = VelocityDataset::new(2, 12, vec![]).unwrap();
        let (report, recons) =
            evaluate_suite(&bank, &empty, 0.1, 0.8, None, &SolverControl::default()).unwrap();
        assert!(report.per_task.is_empty());
        assert!(recons.is_empty());
        assert_eq!(report.mean_error, None);
        assert_eq!(report.std_error, None);
    }

    #[test]
    fn report_summary_matches_recomputation() {
        let plan = ShiftPlan::full(14, 5, 2).unwrap();
        let spec = SyntheticSpec {
            m_true: 2,
            active_shifts_per_task: 2,
            snr_db: Some(15.0),
            amplitude_range: (0.5, 1.5),
            seed: 23,
        };
        let (data, bank, _) = generate_synthetic(&spec, 2, 14, 5, 5, &plan).unwrap();
        let (report, _) =
            evaluate_suite(&bank, &data, 0.01, 0.8, Some((5, 2)), &SolverControl::default())
                .unwrap();
        let mean = report.per_task.iter().map(|r| r.error).sum::<f64>() / 5.0;
        let std = (report
            .per_task
            .iter()
            .map(|r| (r.error - mean).powi(2))
            .sum::<f64>()
            / 5.0)
            .sqrt();
        assert!((report.mean_error.unwrap() - mean).abs() < 1e-15);
        assert!((report.std_error.unwrap() - std).abs() < 1e-15);
    }
}
