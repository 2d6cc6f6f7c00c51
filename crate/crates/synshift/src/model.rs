//! Domain types and the matrix-free time-shift operators.
//!
//! Conventions, fixed crate-wide:
//! - velocity vectors are time-major: `v[t*n + i]` is joint `i` at sample `t`;
//! - synergy templates are joint-major: `template[i*t_s + u]` is joint `i` at
//!   sample `u` of the template window.
//!
//! The shift dictionary is never materialized; every operator is an indexing
//! loop over the template window. Dense matrices appear only in test oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A bank of `m` synergy templates over `n` joints and `t_s` samples each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyBank {
    n: usize,
    t_s: usize,
    templates: Vec<Vec<f64>>,
    active: Vec<bool>,
}

impl SynergyBank {
    pub fn new(n: usize, t_s: usize, templates: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 || t_s == 0 {
            return Err(Error::Config(
                "synergy bank needs n >= 1 and t_s >= 1".into(),
            ));
        }
        for (j, tpl) in templates.iter().enumerate() {
            if tpl.len() != n * t_s {
                return Err(Error::dim("synergy template", n * t_s, tpl.len()));
            }
            if !linalg::all_finite(tpl) {
                return Err(Error::Input(format!("template {j} has non-finite entries")));
            }
        }
        let active = vec![true; templates.len()];
        Ok(SynergyBank {
            n,
            t_s,
            templates,
            active,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.n
    }

    pub fn template_len(&self) -> usize {
        self.t_s
    }

    pub fn synergy_count(&self) -> usize {
        self.templates.len()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn template(&self, j: usize) -> &[f64] {
        &self.templates[j]
    }

    pub fn template_mut(&mut self, j: usize) -> &mut Vec<f64> {
        &mut self.templates[j]
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active[j]
    }

    pub fn set_active(&mut self, j: usize, active: bool) {
        self.active[j] = active;
    }

    /// Indices of the currently active synergies, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.synergy_count())
            .filter(|&j| self.active[j])
            .collect()
    }
}

/// `G` tasks of `n`-joint velocity trajectories over `t` samples, each stored
/// time-major as one flat vector of length `n * t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityDataset {
    n: usize,
    t: usize,
    tasks: Vec<Vec<f64>>,
}

impl VelocityDataset {
    pub fn new(n: usize, t: usize, tasks: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 || t == 0 {
            return Err(Error::Config("dataset needs n >= 1 and t >= 1".into()));
        }
        for task in &tasks {
            if task.len() != n * t {
                return Err(Error::dim("velocity task", n * t, task.len()));
            }
        }
        Ok(VelocityDataset { n, t, tasks })
    }

    pub fn joint_count(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> usize {
        self.t
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, g: usize) -> &[f64] {
        &self.tasks[g]
    }

    pub fn tasks(&self) -> &[Vec<f64>] {
        &self.tasks
    }

    /// Splits tasks into two datasets by index, preserving order.
    pub fn split(&self, first: &[usize], second: &[usize]) -> (VelocityDataset, VelocityDataset) {
        let pick = |ids: &[usize]| VelocityDataset {
            n: self.n,
            t: self.t,
            tasks: ids.iter().map(|&g| self.tasks[g].clone()).collect(),
        };
        (pick(first), pick(second))
    }
}

/// The allowed integer shifts per synergy. The default enumerates the full
/// range `0..=window - t_s` with unit stride; sparser grids are permitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    window: usize,
    t_s: usize,
    shifts: Vec<Vec<usize>>,
}

impl ShiftPlan {
    pub fn new(window: usize, t_s: usize, shifts: Vec<Vec<usize>>) -> Result<Self> {
        if t_s == 0 || t_s > window {
            return Err(Error::Config(format!(
                "template length {t_s} must satisfy 1 <= t_s <= window {window}"
            )));
        }
        let max_shift = window - t_s;
        for (j, list) in shifts.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Config(format!("synergy {j} has no shifts")));
            }
            for pair in list.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::Config(format!(
                        "shifts for synergy {j} must be strictly increasing"
                    )));
                }
            }
            if *list.last().unwrap() > max_shift {
                return Err(Error::ShiftOutOfRange {
                    shift: *list.last().unwrap(),
                    max_shift,
                    window,
                    template_len: t_s,
                });
            }
        }
        Ok(ShiftPlan {
            window,
            t_s,
            shifts,
        })
    }

    /// Full grid: every shift `0..=window - t_s` for each of `m` synergies.
    pub fn full(window: usize, t_s: usize, m: usize) -> Result<Self> {
        if t_s == 0 || t_s > window {
            return Err(Error::Config(format!(
                "template length {t_s} must satisfy 1 <= t_s <= window {window}"
            )));
        }
        let grid: Vec<usize> = (0..=window - t_s).collect();
        Ok(ShiftPlan {
            window,
            t_s,
            shifts: vec![grid; m],
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn template_len(&self) -> usize {
        self.t_s
    }

    pub fn synergy_count(&self) -> usize {
        self.shifts.len()
    }

    pub fn shifts(&self, j: usize) -> &[usize] {
        &self.shifts[j]
    }

    pub fn shift_count(&self, j: usize) -> usize {
        self.shifts[j].len()
    }

    /// Total coefficient dimension across a set of synergies.
    pub fn total_shift_count(&self, synergies: &[usize]) -> usize {
        synergies.iter().map(|&j| self.shifts[j].len()).sum()
    }

    /// Same shift grids re-targeted at a different window length.
    /// Used to build testing banks whose window differs from training.
    pub fn with_window(&self, window: usize) -> Result<Self> {
        ShiftPlan::full(window, self.t_s, self.shifts.len())
    }
}

/// Per task and per synergy, the activation amplitudes, one per allowed shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    per_task: Vec<Vec<Vec<f64>>>,
}

impl CoefficientSet {
    /// All-zero coefficients matching `plan`, for `task_count` tasks.
    pub fn zeros(task_count: usize, plan: &ShiftPlan) -> Self {
        let one_task: Vec<Vec<f64>> = (0..plan.synergy_count())
            .map(|j| vec![0.0; plan.shift_count(j)])
            .collect();
        CoefficientSet {
            per_task: vec![one_task; task_count],
        }
    }

    pub fn from_parts(per_task: Vec<Vec<Vec<f64>>>, plan: &ShiftPlan) -> Result<Self> {
        for task in &per_task {
            if task.len() != plan.synergy_count() {
                return Err(Error::dim(
                    "coefficient synergy count",
                    plan.synergy_count(),
                    task.len(),
                ));
            }
            for (j, c) in task.iter().enumerate() {
                if c.len() != plan.shift_count(j) {
                    return Err(Error::dim("coefficient vector", plan.shift_count(j), c.len()));
                }
            }
        }
        Ok(CoefficientSet { per_task })
    }

    pub fn task_count(&self) -> usize {
        self.per_task.len()
    }

    pub fn synergy_count(&self) -> usize {
        self.per_task.first().map_or(0, |t| t.len())
    }

    pub fn get(&self, g: usize, j: usize) -> &[f64] {
        &self.per_task[g][j]
    }

    pub fn get_mut(&mut self, g: usize, j: usize) -> &mut Vec<f64> {
        &mut self.per_task[g][j]
    }

    pub fn task(&self, g: usize) -> &[Vec<f64>] {
        &self.per_task[g]
    }

    pub fn set_task(&mut self, g: usize, coeffs: Vec<Vec<f64>>) {
        self.per_task[g] = coeffs;
    }

    /// Largest Euclidean norm of `c_j^g` over all tasks, for synergy `j`.
    pub fn max_group_norm(&self, j: usize) -> f64 {
        self.per_task
            .iter()
            .map(|task| linalg::norm2(&task[j]))
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean norm over all (task, synergy) groups.
    pub fn max_norm_overall(&self) -> f64 {
        (0..self.synergy_count())
            .map(|j| self.max_group_norm(j))
            .fold(0.0, f64::max)
    }
}

fn check_template(template: &[f64], n: usize, t_s: usize) -> Result<()> {
    if template.len() != n * t_s {
        return Err(Error::dim("template", n * t_s, template.len()));
    }
    Ok(())
}

fn check_shift(shift: usize, window: usize, t_s: usize) -> Result<()> {
    if t_s > window || shift > window - t_s {
        return Err(Error::ShiftOutOfRange {
            shift,
            max_shift: window.saturating_sub(t_s),
            window,
            template_len: t_s,
        });
    }
    Ok(())
}

/// Accumulates `weight * (template shifted by `shift`)` into the time-major
/// output window. This is the one kernel behind every operator here.
#[inline]
fn shift_add_into(out: &mut [f64], template: &[f64], shift: usize, weight: f64, n: usize, t_s: usize) {
    for i in 0..n {
        let joint = &template[i * t_s..(i + 1) * t_s];
        for (u, &value) in joint.iter().enumerate() {
            out[(shift + u) * n + i] += weight * value;
        }
    }
}

/// Embeds a template at integer delay `shift` inside a `window`-sample frame:
/// the action of one shift matrix on the template, without forming the matrix.
pub fn apply_shift(
    template: &[f64],
    shift: usize,
    n: usize,
    window: usize,
    t_s: usize,
) -> Result<Vec<f64>> {
    check_template(template, n, t_s)?;
    check_shift(shift, window, t_s)?;
    let mut out = vec![0.0; n * window];
    for i in 0..n {
        let joint = &template[i * t_s..(i + 1) * t_s];
        for (u, &value) in joint.iter().enumerate() {
            out[(shift + u) * n + i] = value;
        }
    }
    Ok(out)
}

/// The synergy dictionary applied to a coefficient vector: the weighted
/// superposition of all shifted copies of one template.
pub fn dictionary_apply(
    template: &[f64],
    coeffs: &[f64],
    shifts: &[usize],
    n: usize,
    window: usize,
    t_s: usize,
) -> Result<Vec<f64>> {
    check_template(template, n, t_s)?;
    if coeffs.len() != shifts.len() {
        return Err(Error::dim("coefficient vector", shifts.len(), coeffs.len()));
    }
    if let Some(&last) = shifts.last() {
        check_shift(last, window, t_s)?;
    }
    let mut out = vec![0.0; n * window];
    for (&c, &shift) in coeffs.iter().zip(shifts) {
        if c != 0.0 {
            shift_add_into(&mut out, template, shift, c, n, t_s);
        }
    }
    Ok(out)
}

/// Adjoint of [`dictionary_apply`]: entry `k` is the inner product of the
/// `k`-th shifted template with `residual`.
pub fn dictionary_adjoint_apply(
    template: &[f64],
    residual: &[f64],
    shifts: &[usize],
    n: usize,
    window: usize,
    t_s: usize,
) -> Result<Vec<f64>> {
    check_template(template, n, t_s)?;
    if residual.len() != n * window {
        return Err(Error::dim("residual", n * window, residual.len()));
    }
    if let Some(&last) = shifts.last() {
        check_shift(last, window, t_s)?;
    }
    let mut out = vec![0.0; shifts.len()];
    for (k, &shift) in shifts.iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            let joint = &template[i * t_s..(i + 1) * t_s];
            for (u, &value) in joint.iter().enumerate() {
                acc += value * residual[(shift + u) * n + i];
            }
        }
        out[k] = acc;
    }
    Ok(out)
}

/// The coefficient operator `sum_k c_k D_k` applied to a template-space
/// vector. By bilinearity this is the same arithmetic as [`dictionary_apply`]
/// with the roles of template and coefficients exchanged, and the
/// implementation shares that exact code path.
pub fn coefficient_operator_apply(
    coeffs: &[f64],
    x: &[f64],
    shifts: &[usize],
    n: usize,
    window: usize,
    t_s: usize,
) -> Result<Vec<f64>> {
    dictionary_apply(x, coeffs, shifts, n, window, t_s)
}

/// Adjoint of [`coefficient_operator_apply`]: maps a window-space residual
/// back to template space, `sum_k c_k D_k^T r`.
pub fn coefficient_operator_adjoint_apply(
    coeffs: &[f64],
    residual: &[f64],
    shifts: &[usize],
    n: usize,
    window: usize,
    t_s: usize,
) -> Result<Vec<f64>> {
    if coeffs.len() != shifts.len() {
        return Err(Error::dim("coefficient vector", shifts.len(), coeffs.len()));
    }
    if residual.len() != n * window {
        return Err(Error::dim("residual", n * window, residual.len()));
    }
    if let Some(&last) = shifts.last() {
        check_shift(last, window, t_s)?;
    }
    let mut out = vec![0.0; n * t_s];
    for (&c, &shift) in coeffs.iter().zip(shifts) {
        if c == 0.0 {
            continue;
        }
        for i in 0..n {
            for u in 0..t_s {
                out[i * t_s + u] += c * residual[(shift + u) * n + i];
            }
        }
    }
    Ok(out)
}

/// Forward model for one task: the sum of every active synergy's dictionary
/// applied to its coefficients.
pub fn reconstruct_task(
    bank: &SynergyBank,
    coeffs_for_task: &[Vec<f64>],
    plan: &ShiftPlan,
) -> Result<Vec<f64>> {
    if coeffs_for_task.len() != bank.synergy_count() {
        return Err(Error::dim(
            "per-task coefficient list",
            bank.synergy_count(),
            coeffs_for_task.len(),
        ));
    }
    if plan.synergy_count() != bank.synergy_count() {
        return Err(Error::dim(
            "shift plan synergy count",
            bank.synergy_count(),
            plan.synergy_count(),
        ));
    }
    if plan.template_len() != bank.template_len() {
        return Err(Error::dim(
            "shift plan template length",
            bank.template_len(),
            plan.template_len(),
        ));
    }
    let n = bank.joint_count();
    let t_s = bank.template_len();
    let window = plan.window();
    let mut out = vec![0.0; n * window];
    for j in 0..bank.synergy_count() {
        if !bank.is_active(j) {
            continue;
        }
        let coeffs = &coeffs_for_task[j];
        if coeffs.len() != plan.shift_count(j) {
            return Err(Error::dim("coefficient vector", plan.shift_count(j), coeffs.len()));
        }
        for (&c, &shift) in coeffs.iter().zip(plan.shifts(j)) {
            if c != 0.0 {
                shift_add_into(&mut out, bank.template(j), shift, c, n, t_s);
            }
        }
    }
    Ok(out)
}
