//! Alternating minimization: a sparse group LASSO update of the activation
//! coefficients (independent per task), a cyclic ridge update of each synergy
//! waveform against the residual that excludes it, then normalization and
//! pruning of synergies that stay inactive.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    coefficient_operator_adjoint_apply, coefficient_operator_apply, dictionary_adjoint_apply,
    dictionary_apply, reconstruct_task, CoefficientSet, ShiftPlan, SynergyBank, VelocityDataset,
};
use crate::solvers::{
    ridge_solve, sparse_group_lasso_solve, GroupPartition, SolverControl, SparseGroupPenalty,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Tuning parameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmmConfig {
    /// Number of randomly initialized candidate synergies.
    pub m_int: usize,
    /// Template length in samples.
    pub t_s: usize,
    pub penalty: SparseGroupPenalty,
    /// Ridge weight on the synergy update; the smoothing weight of the joint
    /// objective is alpha / (2 G) per task.
    pub alpha: f64,
    pub max_outer_iters: usize,
    /// Stop when the relative change of the recorded objective falls below
    /// this.
    pub outer_rel_tol: f64,
    /// Inactivity threshold, relative to the largest coefficient group norm.
    pub prune_eps: f64,
    pub seed: u64,
    /// Subproblem solver control (C-step and S-step).
    pub inner: SolverControl,
    /// Warm-start subproblems from the previous iterate. Changes speed only,
    /// not fixed points, but guarantees the per-step descent property.
    pub warm_start: bool,
    /// Normalize/rescale every this many outer iterations; 0 disables.
    pub normalize_every: usize,
    /// Consecutive inactive iterations before a synergy is permanently
    /// removed (it is always removed at convergence).
    pub inactive_patience: usize,
    /// Scale each group penalty by sqrt(K_j). Off by default.
    pub sqrt_group_weighting: bool,
}

impl AmmConfig {
    pub fn new(m_int: usize, t_s: usize, penalty: SparseGroupPenalty, alpha: f64) -> Result<Self> {
        let config = AmmConfig {
            m_int,
            t_s,
            penalty,
            alpha,
            max_outer_iters: 200,
            outer_rel_tol: 1e-5,
            prune_eps: 1e-8,
            seed: 0,
            inner: SolverControl::default(),
            warm_start: true,
            normalize_every: 1,
            inactive_patience: 3,
            sqrt_group_weighting: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_int == 0 {
            return Err(Error::Config("m_int must be >= 1".into()));
        }
        if self.t_s == 0 {
            return Err(Error::Config("t_s must be >= 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.prune_eps > 0.0) {
            return Err(Error::Config(format!(
                "prune_eps must be > 0, got {}",
                self.prune_eps
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be >= 1".into()));
        }
        if !(self.outer_rel_tol >= 0.0) {
            return Err(Error::Config("outer_rel_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything recorded about one outer iteration. The objective is the joint
/// one; the pre-normalization values support the descent property, which
/// normalization and pruning deliberately sit outside of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterIteration {
    pub iteration: usize,
    pub objective_start: f64,
    pub objective_after_c: f64,
    pub objective_after_s: f64,
    /// Objective after normalization and pruning; this is the recorded trace
    /// value the stopping rule sees.
    pub objective: f64,
    pub fit_before_normalize: f64,
    pub fit_after_normalize: f64,
    pub active_count: usize,
}

/// Receives one record per outer iteration.
pub trait ProgressSink {
    fn on_iteration(&mut self, record: &OuterIteration);
}

/// Discards progress records.
pub struct NullSink;

impl ProgressSink for NullSink {
    fn on_iteration(&mut self, _record: &OuterIteration) {}
}

impl<F: FnMut(&OuterIteration)> ProgressSink for F {
    fn on_iteration(&mut self, record: &OuterIteration) {
        self(record)
    }
}

/// Mutable training state.
#[derive(Debug, Clone)]
pub struct AmmState {
    pub bank: SynergyBank,
    pub coeffs: CoefficientSet,
    /// Recorded objective per outer iteration, starting with the value at
    /// initialization.
    pub objective_trace: Vec<f64>,
    /// Full per-iteration records.
    pub iterations: Vec<OuterIteration>,
    pub iteration: usize,
    inactive_streak: Vec<usize>,
}

impl AmmState {
    pub fn active_count(&self) -> usize {
        self.bank.active_count()
    }
}

/// Random unit-norm templates, all-zero coefficients. Deterministic in the
/// seed.
pub fn initialize(
    config: &AmmConfig,
    data: &VelocityDataset,
    plan: &ShiftPlan,
) -> Result<AmmState> {
    config.validate()?;
    if config.t_s > data.window() {
        return Err(Error::Config(format!(
            "template length {} exceeds data window {}",
            config.t_s,
            data.window()
        )));
    }
    if plan.synergy_count() != config.m_int
        || plan.window() != data.window()
        || plan.template_len() != config.t_s
    {
        return Err(Error::Config(
            "shift plan does not match the configuration and data dimensions".into(),
        ));
    }
    let n = data.joint_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut templates = Vec::with_capacity(config.m_int);
    for _ in 0..config.m_int {
        loop {
            let mut tpl: Vec<f64> = (0..n * config.t_s)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let norm = linalg::norm2(&tpl);
            if norm > 1e-12 {
                linalg::scale(1.0 / norm, &mut tpl);
                templates.push(tpl);
                break;
            }
        }
    }
    let bank = SynergyBank::new(n, config.t_s, templates)?;
    let coeffs = CoefficientSet::zeros(data.task_count(), plan);
    Ok(AmmState {
        bank,
        coeffs,
        objective_trace: Vec::new(),
        iterations: Vec::new(),
        iteration: 0,
        inactive_streak: vec![0; config.m_int],
    })
}

fn group_partition(config: &AmmConfig, plan: &ShiftPlan, active: &[usize]) -> Result<GroupPartition> {
    let sizes: Vec<usize> = active.iter().map(|&j| plan.shift_count(j)).collect();
    let weights: Vec<f64> = sizes
        .iter()
        .map(|&k| {
            if config.sqrt_group_weighting {
                (k as f64).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    GroupPartition::contiguous_weighted(&sizes, weights)
}

/// Coefficient update: for each task independently, the sparse group LASSO
/// against the block dictionary of all active synergies. Tasks run in
/// parallel; the merge is keyed by task index.
pub fn c_step(
    state: &AmmState,
    data: &VelocityDataset,
    plan: &ShiftPlan,
    config: &AmmConfig,
) -> Result<CoefficientSet> {
    let bank = &state.bank;
    let active = bank.active_indices();
    let mut out = CoefficientSet::zeros(data.task_count(), plan);
    if active.is_empty() {
        return Ok(out);
    }
    let n = bank.joint_count();
    let t_s = bank.template_len();
    let window = data.window();
    let groups = group_partition(config, plan, &active)?;
    let dim = groups.dim();

    let apply = |c: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n * window];
        let mut offset = 0;
        for &j in &active {
            let k = plan.shift_count(j);
            let block = dictionary_apply(bank.template(j), &c[offset..offset + k], plan.shifts(j), n, window, t_s)
                .expect("validated dimensions");
            linalg::axpy(1.0, &block, &mut y);
            offset += k;
        }
        y
    };
    let adjoint = |r: &[f64]| -> Vec<f64> {
        let mut g = Vec::with_capacity(dim);
        for &j in &active {
            g.extend(
                dictionary_adjoint_apply(bank.template(j), r, plan.shifts(j), n, window, t_s)
                    .expect("validated dimensions"),
            );
        }
        g
    };

    let solved: Vec<Result<Vec<f64>>> = (0..data.task_count())
        .into_par_iter()
        .map(|g| {
            let warm: Option<Vec<f64>> = if config.warm_start {
                let mut c = Vec::with_capacity(dim);
                for &j in &active {
                    c.extend_from_slice(state.coeffs.get(g, j));
                }
                Some(c)
            } else {
                None
            };
            sparse_group_lasso_solve(
                apply,
                adjoint,
                &groups,
                data.task(g),
                &config.penalty,
                &config.inner,
                warm.as_deref(),
            )
            .map(|outcome| outcome.coeffs)
            .map_err(|e| Error::Step {
                step: "c_step",
                unit: "task",
                index: g,
                source: Box::new(e),
            })
        })
        .collect();

    for (g, solved_task) in solved.into_iter().enumerate() {
        let c = solved_task?;
        let mut offset = 0;
        for &j in &active {
            let k = plan.shift_count(j);
            *out.get_mut(g, j) = c[offset..offset + k].to_vec();
            offset += k;
        }
    }
    Ok(out)
}

/// Synergy update: cycles ascending over active synergies with nonzero
/// coefficients, each solved as a ridge regression against the residual
/// excluding that synergy, using the freshest templates.
pub fn s_step(
    state: &AmmState,
    data: &VelocityDataset,
    plan: &ShiftPlan,
    config: &AmmConfig,
) -> Result<SynergyBank> {
    let mut bank = state.bank.clone();
    let coeffs = &state.coeffs;
    let n = bank.joint_count();
    let t_s = bank.template_len();
    let window = data.window();
    let tasks = data.task_count();

    // Residual v^g - (current full reconstruction) per task, updated as
    // templates change.
    let mut residuals: Vec<Vec<f64>> = (0..tasks)
        .map(|g| {
            reconstruct_task(&bank, coeffs.task(g), plan)
                .map(|rec| linalg::sub(data.task(g), &rec))
        })
        .collect::<Result<_>>()?;

    for j in bank.active_indices() {
        if (0..tasks).all(|g| coeffs.get(g, j).iter().all(|&c| c == 0.0)) {
            continue;
        }
        // r_{-j}^g: add synergy j's own contribution back in.
        let contributions: Vec<Vec<f64>> = (0..tasks)
            .map(|g| {
                dictionary_apply(bank.template(j), coeffs.get(g, j), plan.shifts(j), n, window, t_s)
            })
            .collect::<Result<_>>()?;
        let target_excluding: Vec<Vec<f64>> = (0..tasks)
            .map(|g| {
                let mut r = residuals[g].clone();
                linalg::axpy(1.0, &contributions[g], &mut r);
                r
            })
            .collect();
        let stacked: Vec<f64> = target_excluding.iter().flatten().copied().collect();

        let apply = |s: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(tasks * n * window);
            for g in 0..tasks {
                out.extend(
                    coefficient_operator_apply(coeffs.get(g, j), s, plan.shifts(j), n, window, t_s)
                        .expect("validated dimensions"),
                );
            }
            out
        };
        let adjoint = |r: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n * t_s];
            for g in 0..tasks {
                let chunk = &r[g * n * window..(g + 1) * n * window];
                let back = coefficient_operator_adjoint_apply(
                    coeffs.get(g, j),
                    chunk,
                    plan.shifts(j),
                    n,
                    window,
                    t_s,
                )
                .expect("validated dimensions");
                linalg::axpy(1.0, &back, &mut out);
            }
            out
        };

        let warm = if config.warm_start {
            Some(bank.template(j).to_vec())
        } else {
            None
        };
        let outcome = ridge_solve(
            apply,
            adjoint,
            &stacked,
            config.alpha,
            &config.inner,
            warm.as_deref(),
        )
        .map_err(|e| Error::Step {
            step: "s_step",
            unit: "synergy",
            index: j,
            source: Box::new(e),
        })?;
        *bank.template_mut(j) = outcome.solution;

        // Freshest residuals for the remaining synergies in this sweep.
        for g in 0..tasks {
            let new_contribution =
                dictionary_apply(bank.template(j), coeffs.get(g, j), plan.shifts(j), n, window, t_s)?;
            let r = &mut residuals[g];
            linalg::axpy(1.0, &contributions[g], r);
            linalg::axpy(-1.0, &new_contribution, r);
        }
    }
    Ok(bank)
}

/// Unit-normalizes every active template and rescales its coefficients so the
/// product (and the fit term) is unchanged. Zero-norm templates are flagged
/// inactive.
pub fn normalize_rescale(state: &mut AmmState) {
    for j in state.bank.active_indices() {
        let norm = linalg::norm2(state.bank.template(j));
        if norm > 0.0 {
            linalg::scale(1.0 / norm, state.bank.template_mut(j));
            for g in 0..state.coeffs.task_count() {
                linalg::scale(norm, state.coeffs.get_mut(g, j));
            }
        } else {
            state.bank.set_active(j, false);
        }
    }
}

/// Flags synergies whose coefficient groups stay below `prune_eps` relative
/// to the largest group norm, and permanently removes them once the streak
/// reaches `patience` consecutive iterations. Removal zeroes the synergy's
/// coefficients so it no longer contributes anywhere.
pub fn prune_inactive(state: &mut AmmState, prune_eps: f64, patience: usize) {
    let active = state.bank.active_indices();
    let reference = active
        .iter()
        .map(|&j| state.coeffs.max_group_norm(j))
        .fold(0.0, f64::max);
    let threshold = prune_eps * reference;
    for &j in &active {
        let flagged = state.coeffs.max_group_norm(j) <= threshold;
        if flagged {
            state.inactive_streak[j] += 1;
        } else {
            state.inactive_streak[j] = 0;
        }
        if flagged && state.inactive_streak[j] >= patience {
            state.bank.set_active(j, false);
            for g in 0..state.coeffs.task_count() {
                state.coeffs.get_mut(g, j).iter_mut().for_each(|c| *c = 0.0);
            }
        }
    }
}

/// The squared-loss term of the joint objective.
pub fn fit_term(state: &AmmState, data: &VelocityDataset, plan: &ShiftPlan) -> Result<f64> {
    let mut acc = 0.0;
    for g in 0..data.task_count() {
        let rec = reconstruct_task(&state.bank, state.coeffs.task(g), plan)?;
        let r = linalg::sub(data.task(g), &rec);
        acc += 0.5 * linalg::dot(&r, &r);
    }
    Ok(acc)
}

/// The joint objective: squared loss, sparse-group penalty over active
/// synergies, and the smoothing term. The smoothing weight is alpha/(2G) per
/// task, which totals (alpha/2) * sum_j ||s^j||^2, exactly what the S-step
/// ridge minimizes.
pub fn objective(
    state: &AmmState,
    data: &VelocityDataset,
    plan: &ShiftPlan,
    config: &AmmConfig,
) -> Result<f64> {
    let mut acc = fit_term(state, data, plan)?;
    for j in state.bank.active_indices() {
        let weight = if config.sqrt_group_weighting {
            (plan.shift_count(j) as f64).sqrt()
        } else {
            1.0
        };
        for g in 0..data.task_count() {
            let c = state.coeffs.get(g, j);
            acc += config.penalty.lambda1 * weight * linalg::norm2(c);
            acc += config.penalty.lambda2 * c.iter().map(|v| v.abs()).sum::<f64>();
        }
        acc += 0.5 * config.alpha * linalg::dot(state.bank.template(j), state.bank.template(j));
    }
    Ok(acc)
}

/// Runs the full loop: C-step, S-step, normalize/rescale, prune, record,
/// until the recorded objective stalls or the iteration cap is reached. At
/// convergence, currently-flagged synergies are removed regardless of streak.
pub fn run_with_sink(
    config: &AmmConfig,
    data: &VelocityDataset,
    plan: &ShiftPlan,
    sink: &mut dyn ProgressSink,
) -> Result<AmmState> {
    let mut state = initialize(config, data, plan)?;
    let mut previous = objective(&state, data, plan, config)?;
    state.objective_trace.push(previous);

    for iteration in 1..=config.max_outer_iters {
        let objective_start = previous;

        state.coeffs = c_step(&state, data, plan, config)?;
        let objective_after_c = objective(&state, data, plan, config)?;

        state.bank = s_step(&state, data, plan, config)?;
        let objective_after_s = objective(&state, data, plan, config)?;
        let fit_before_normalize = fit_term(&state, data, plan)?;

        if config.normalize_every > 0 && iteration % config.normalize_every == 0 {
            normalize_rescale(&mut state);
        }
        let fit_after_normalize = fit_term(&state, data, plan)?;
        prune_inactive(&mut state, config.prune_eps, config.inactive_patience);

        let recorded = objective(&state, data, plan, config)?;
        if !recorded.is_finite() {
            return Err(Error::Divergence(format!(
                "objective became non-finite at outer iteration {iteration}; trace: {:?}",
                state.objective_trace
            )));
        }
        let record = OuterIteration {
            iteration,
            objective_start,
            objective_after_c,
            objective_after_s,
            objective: recorded,
            fit_before_normalize,
            fit_after_normalize,
            active_count: state.bank.active_count(),
        };
        state.objective_trace.push(recorded);
        state.iterations.push(record);
        state.iteration = iteration;
        sink.on_iteration(&record);

        let stalled =
            (previous - recorded).abs() <= config.outer_rel_tol * previous.abs().max(1e-12);
        previous = recorded;
        if stalled {
            break;
        }
    }

    // Convergence (or cap): drop anything currently flagged inactive.
    prune_inactive(&mut state, config.prune_eps, 1);
    Ok(state)
}

pub fn run(config: &AmmConfig, data: &VelocityDataset, plan: &ShiftPlan) -> Result<AmmState> {
    run_with_sink(config, data, plan, &mut NullSink)
}
