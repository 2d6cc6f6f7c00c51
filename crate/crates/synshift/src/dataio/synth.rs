//! Planted-truth synthetic data: smooth random templates, a few random
//! (synergy, shift) activations per task, optional Gaussian noise at a target
//! SNR.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::savitzky_golay;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{reconstruct_task, CoefficientSet, ShiftPlan, SynergyBank, VelocityDataset};

/// Ground-truth description for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m_true: usize,
    pub active_shifts_per_task: usize,
    /// Signal-to-noise ratio in dB; `None` generates noiseless data.
    pub snr_db: Option<f64>,
    /// Positive amplitude range `[low, high]` for the planted activations.
    pub amplitude_range: (f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_true == 0 {
            return Err(Error::Config("m_true must be >= 1".into()));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::Config(
                    "snr_db must be finite; omit it for noiseless data".into(),
                ));
            }
        }
        let (low, high) = self.amplitude_range;
        if !(low > 0.0 && high >= low && high.is_finite()) {
            return Err(Error::Config(format!(
                "amplitude_range must satisfy 0 < low <= high, got ({low}, {high})"
            )));
        }
        Ok(())
    }
}

/// Largest odd window not exceeding both 11 and the template length.
fn smoothing_window(t_s: usize) -> usize {
    let w = t_s.min(11);
    if w % 2 == 0 {
        w - 1
    } else {
        w
    }
}

/// Draws smooth unit-norm templates, plants sparse activations per task, and
/// forms velocities with optional noise. Deterministic given `spec.seed`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    n: usize,
    t: usize,
    t_s: usize,
    g: usize,
    plan: &ShiftPlan,
) -> Result<(VelocityDataset, SynergyBank, CoefficientSet)> {
    spec.validate()?;
    if t_s > t {
        return Err(Error::Config(format!(
            "template length {t_s} exceeds window {t}"
        )));
    }
    if plan.synergy_count() != spec.m_true {
        return Err(Error::dim("shift plan synergies", spec.m_true, plan.synergy_count()));
    }
    if plan.window() != t || plan.template_len() != t_s {
        return Err(Error::Config(
            "shift plan window/template length disagree with the requested dimensions".into(),
        ));
    }
    let pair_count = plan.total_shift_count(&(0..spec.m_true).collect::<Vec<_>>());
    if spec.active_shifts_per_task > pair_count {
        return Err(Error::Config(format!(
            "active_shifts_per_task {} exceeds the {} available (synergy, shift) pairs",
            spec.active_shifts_per_task, pair_count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Smooth unit-norm templates.
    let window = smoothing_window(t_s);
    let mut templates = Vec::with_capacity(spec.m_true);
    for _ in 0..spec.m_true {
        loop {
            let raw: Vec<f64> = (0..n * t_s).map(|_| rng.sample(StandardNormal)).collect();
            let mut smooth = Vec::with_capacity(n * t_s);
            for i in 0..n {
                let series = &raw[i * t_s..(i + 1) * t_s];
                if window >= 3 {
                    smooth.extend(savitzky_golay(series, window, window.min(4) - 1)?);
                } else {
                    smooth.extend_from_slice(series);
                }
            }
            let norm = linalg::norm2(&smooth);
            if norm > 1e-12 {
                linalg::scale(1.0 / norm, &mut smooth);
                templates.push(smooth);
                break;
            }
        }
    }
    let bank = SynergyBank::new(n, t_s, templates)?;

    // Sparse activations: distinct (synergy, shift) pairs per task.
    let mut coeffs = CoefficientSet::zeros(g, plan);
    for task in 0..g {
        let chosen = rand::seq::index::sample(&mut rng, pair_count, spec.active_shifts_per_task);
        for flat in chosen.iter() {
            let (mut j, mut k) = (0, flat);
            while k >= plan.shift_count(j) {
                k -= plan.shift_count(j);
                j += 1;
            }
            let amplitude = rng.gen_range(spec.amplitude_range.0..=spec.amplitude_range.1);
            coeffs.get_mut(task, j)[k] = amplitude;
        }
    }

    // Clean mixtures, then noise scaled to the requested SNR over the whole
    // dataset.
    let clean: Vec<Vec<f64>> = (0..g)
        .map(|task| reconstruct_task(&bank, coeffs.task(task), plan))
        .collect::<Result<Vec<_>>>()?;
    let tasks = match spec.snr_db {
        None => clean,
        Some(snr) => {
            let total: f64 = clean
                .iter()
                .map(|task| linalg::dot(task, task))
                .sum::<f64>();
            let samples = (g * n * t) as f64;
            let signal_power = total / samples;
            let sigma = if signal_power > 0.0 {
                (signal_power / 10f64.powf(snr / 10.0)).sqrt()
            } else {
                1.0
            };
            clean
                .into_iter()
                .map(|mut task| {
                    for v in task.iter_mut() {
                        let e: f64 = rng.sample(StandardNormal);
                        *v += sigma * e;
                    }
                    task
                })
                .collect()
        }
    };

    Ok((VelocityDataset::new(n, t, tasks)?, bank, coeffs))
}
