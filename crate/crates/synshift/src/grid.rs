//! Hyperparameter grid search over the penalty weights, scored by held-out
//! reconstruction error on a deterministic task split, then a refit on the
//! full dataset with the winning point.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amm::{run, AmmConfig, AmmState};
use crate::error::{Error, Result};
use crate::model::{ShiftPlan, VelocityDataset};
use crate::recon::evaluate_suite;
use crate::solvers::SparseGroupPenalty;

/// Candidate values per tuning parameter. The default spans three decades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda1: vec![0.01, 0.1, 1.0],
            lambda2: vec![0.01, 0.1, 1.0],
            alpha: vec![0.01, 0.1, 1.0],
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.lambda1.is_empty() || self.lambda2.is_empty() || self.alpha.is_empty() {
            return Err(Error::Config("grid axes must be non-empty".into()));
        }
        for v in self
            .lambda1
            .iter()
            .chain(&self.lambda2)
            .chain(&self.alpha)
        {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!("grid values must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// How validation reconstructions are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSettings {
    pub lambda_test: f64,
    pub tau: f64,
    pub smoothing: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub validation_error: f64,
    pub m_final: usize,
    pub final_objective: f64,
}

#[derive(Debug)]
pub struct GridOutcome {
    pub results: Vec<GridPointResult>,
    /// Index into `results` of the winning point (smallest validation error,
    /// first on ties).
    pub best: usize,
    /// State refit on the full dataset with the winning parameters.
    pub refit: AmmState,
}

/// Deterministic holdout split of task indices.
pub fn split_tasks(task_count: usize, holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout_fraction must lie strictly between 0 and 1, got {holdout_fraction}"
        )));
    }
    if task_count < 2 {
        return Err(Error::Config(
            "grid search needs at least two tasks to split".into(),
        ));
    }
    let mut indices: Vec<usize> = (0..task_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d_u64);
    indices.shuffle(&mut rng);
    let holdout = ((task_count as f64 * holdout_fraction).round() as usize)
        .clamp(1, task_count - 1);
    let validation: Vec<usize> = indices[..holdout].to_vec();
    let training: Vec<usize> = indices[holdout..].to_vec();
    Ok((training, validation))
}

/// Trains one AMM per grid point on the training split, scores each on the
/// validation split, refits the winner on all tasks.
pub fn grid_search(
    base: &AmmConfig,
    data: &VelocityDataset,
    plan: &ShiftPlan,
    grid: &GridSpec,
    holdout_fraction: f64,
    validation: &ValidationSettings,
) -> Result<GridOutcome> {
    grid.validate()?;
    let (train_ids, val_ids) = split_tasks(data.task_count(), holdout_fraction, base.seed)?;
    let (train_data, val_data) = data.split(&train_ids, &val_ids);

    let mut results = Vec::new();
    let mut states = Vec::new();
    for &lambda1 in &grid.lambda1 {
        for &lambda2 in &grid.lambda2 {
            for &alpha in &grid.alpha {
                let mut config = base.clone();
                config.penalty = SparseGroupPenalty::new(lambda1, lambda2)?;
                config.alpha = alpha;
                let state = run(&config, &train_data, plan)?;
                let (report, _) = evaluate_suite(
                    &state.bank,
                    &val_data,
                    validation.lambda_test,
                    validation.tau,
                    validation.smoothing,
                    &config.inner,
                )?;
                // An all-pruned bank reconstructs nothing; score it 1.
                let validation_error = report.mean_error.unwrap_or(1.0);
                results.push(GridPointResult {
                    lambda1,
                    lambda2,
                    alpha,
                    validation_error,
                    m_final: state.bank.active_count(),
                    final_objective: *state.objective_trace.last().unwrap_or(&f64::NAN),
                });
                states.push(state);
            }
        }
    }

    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.validation_error.total_cmp(&b.1.validation_error))
        .map(|(i, _)| i)
        .expect("grid is non-empty");

    let mut config = base.clone();
    config.penalty = SparseGroupPenalty::new(results[best].lambda1, results[best].lambda2)?;
    config.alpha = results[best].alpha;
    let refit = run(&config, data, plan)?;

    Ok(GridOutcome {
        results,
        best,
        refit,
    })
}
