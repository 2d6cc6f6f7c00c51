//! Command implementations. Failures are classified for the exit code:
//! configuration problems (1), input/output trouble (2), numerical failures
//! (3).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use synshift::amm::{self, AmmConfig, OuterIteration};
use synshift::dataio::{self, CsvContent, SyntheticSpec};
use synshift::files;
use synshift::grid::{grid_search, GridSpec, ValidationSettings};
use synshift::model::{ShiftPlan, VelocityDataset};
use synshift::recon;
use synshift::solvers::{SolverControl, SparseGroupPenalty, StepRule};
use synshift::Error as LibError;

use crate::config::{PosturesSection, RunConfig, SynthSection, TestSection, TrainSection};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

/// Errors raised while constructing solver inputs from the configuration.
fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Errors raised while reading or writing files.
fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Errors raised by the numerical core during a run.
fn numeric_err(e: LibError) -> CliError {
    match e {
        LibError::Io(_) | LibError::Parse { .. } => CliError::Io(e.to_string()),
        LibError::Solver(_) | LibError::Divergence(_) | LibError::Step { .. } => {
            CliError::Numeric(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_json_str(&text).map_err(CliError::Config)
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("config is missing the `{name}` section")))
}

fn load_velocities(path: &Path) -> Result<(VelocityDataset, f64), CliError> {
    match dataio::load_dataset_csv(path)
        .map_err(|e| io_err(format!("{}: {e}", path.display())))?
    {
        CsvContent::Velocities { data, sample_rate } => Ok((data, sample_rate)),
        CsvContent::Angles(_) => Err(io_err(format!(
            "{}: expected kind=velocities, found an angle file",
            path.display()
        ))),
    }
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(config: &RunConfig) -> Result<(), CliError> {
    let section: &SynthSection = require(&config.synth, "synth")?;
    let spec = SyntheticSpec {
        m_true: section.m_true,
        active_shifts_per_task: section.active_shifts_per_task,
        snr_db: section.snr_db,
        amplitude_range: (section.amplitude_range[0], section.amplitude_range[1]),
        seed: section.seed,
    };
    let plan = ShiftPlan::full(section.t, section.t_s, section.m_true).map_err(config_err)?;
    let (data, bank, coeffs) = dataio::generate_synthetic(
        &spec,
        section.n,
        section.t,
        section.t_s,
        section.g,
        &plan,
    )
    .map_err(config_err)?;

    dataio::save_velocity_csv(&section.dataset_out, &data, section.sample_rate)
        .map_err(io_err)?;
    files::save_truth_json(&section.truth_out, &spec, &plan, &bank, &coeffs).map_err(io_err)?;

    let snr = section
        .snr_db
        .map_or("inf".to_string(), |v| format!("{v}"));
    println!(
        "synthesized dataset: n={} T={} G={} snr_db={} -> {}",
        section.n,
        section.t,
        section.g,
        snr,
        section.dataset_out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn amm_config(section: &TrainSection) -> Result<AmmConfig, CliError> {
    let penalty = SparseGroupPenalty::new(section.lambda1, section.lambda2).map_err(config_err)?;
    let mut config =
        AmmConfig::new(section.m_int, section.t_s, penalty, section.alpha).map_err(config_err)?;
    config.max_outer_iters = section.max_outer_iters;
    config.outer_rel_tol = section.outer_rel_tol;
    config.prune_eps = section.prune_eps;
    config.seed = section.seed;
    config.inner = SolverControl::new(
        section.inner_max_iters,
        section.inner_rel_tol,
        StepRule::FixedFromOperatorNorm,
    )
    .map_err(config_err)?;
    config.warm_start = section.warm_start;
    config.normalize_every = section.normalize_every;
    config.inactive_patience = section.inactive_patience;
    config.sqrt_group_weighting = section.sqrt_group_weighting;
    config.validate().map_err(config_err)?;
    Ok(config)
}

fn grid_bank_path(bank_out: &Path, index: usize) -> PathBuf {
    let stem = bank_out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".to_string());
    bank_out.with_file_name(format!("{stem}.grid{index}.json"))
}

#[derive(Serialize)]
struct GridSummaryPoint {
    lambda1: f64,
    lambda2: f64,
    alpha: f64,
    validation_error: f64,
    m_final: usize,
    final_objective: f64,
    bank_path: String,
}

#[derive(Serialize)]
struct GridSummaryFile {
    schema_version: u32,
    points: Vec<GridSummaryPoint>,
    selected: usize,
    selected_bank: String,
}

pub fn cmd_train(config: &RunConfig, verbose: bool) -> Result<(), CliError> {
    let section = require(&config.train, "train")?;
    let (data, _rate) = load_velocities(&section.dataset)?;
    let base = amm_config(section)?;
    let plan =
        ShiftPlan::full(data.window(), section.t_s, section.m_int).map_err(config_err)?;

    let state = match &section.grid {
        None => {
            let mut trace_rows: Vec<(usize, f64, usize)> = Vec::new();
            let mut sink = |record: &OuterIteration| {
                trace_rows.push((record.iteration, record.objective, record.active_count));
                if verbose {
                    eprintln!(
                        "iter {:4}  objective {:.6e}  active {}",
                        record.iteration, record.objective, record.active_count
                    );
                }
            };
            let state =
                amm::run_with_sink(&base, &data, &plan, &mut sink).map_err(numeric_err)?;
            fs::write(&section.trace_out, files::trace_csv_string(&trace_rows))
                .map_err(io_err)?;
            state
        }
        Some(grid_section) => {
            let grid = GridSpec {
                lambda1: grid_section.lambda1.clone(),
                lambda2: grid_section.lambda2.clone(),
                alpha: grid_section.alpha.clone(),
            };
            let validation = ValidationSettings {
                lambda_test: grid_section.validation_lambda_test,
                tau: grid_section.validation_tau,
                smoothing: None,
            };
            let outcome = grid_search(
                &base,
                &data,
                &plan,
                &grid,
                grid_section.holdout_fraction,
                &validation,
            )
            .map_err(numeric_err)?;

            // One bank per grid point (retrained on the full data would be
            // wasteful; these are the split-trained banks) plus the summary.
            let mut points = Vec::new();
            for (k, point) in outcome.results.iter().enumerate() {
                let path = grid_bank_path(&section.bank_out, k);
                let mut config_k = base.clone();
                config_k.penalty =
                    SparseGroupPenalty::new(point.lambda1, point.lambda2).map_err(config_err)?;
                config_k.alpha = point.alpha;
                points.push(GridSummaryPoint {
                    lambda1: point.lambda1,
                    lambda2: point.lambda2,
                    alpha: point.alpha,
                    validation_error: point.validation_error,
                    m_final: point.m_final,
                    final_objective: point.final_objective,
                    bank_path: path.display().to_string(),
                });
            }
            // Re-run per point to materialize its bank deterministically.
            let (train_ids, val_ids) = synshift::grid::split_tasks(
                data.task_count(),
                grid_section.holdout_fraction,
                base.seed,
            )
            .map_err(config_err)?;
            let (train_data, _) = data.split(&train_ids, &val_ids);
            for (k, point) in outcome.results.iter().enumerate() {
                let mut config_k = base.clone();
                config_k.penalty =
                    SparseGroupPenalty::new(point.lambda1, point.lambda2).map_err(config_err)?;
                config_k.alpha = point.alpha;
                let state_k = amm::run(&config_k, &train_data, &plan).map_err(numeric_err)?;
                files::save_bank_json(grid_bank_path(&section.bank_out, k), &state_k.bank)
                    .map_err(io_err)?;
            }
            let summary = GridSummaryFile {
                schema_version: files::SCHEMA_VERSION,
                points,
                selected: outcome.best,
                selected_bank: section.bank_out.display().to_string(),
            };
            fs::write(
                &grid_section.summary_out,
                serde_json::to_string_pretty(&summary).map_err(io_err)?,
            )
            .map_err(io_err)?;

            let trace_rows: Vec<(usize, f64, usize)> = outcome
                .refit
                .iterations
                .iter()
                .map(|r| (r.iteration, r.objective, r.active_count))
                .collect();
            fs::write(&section.trace_out, files::trace_csv_string(&trace_rows))
                .map_err(io_err)?;
            outcome.refit
        }
    };

    files::save_bank_json(&section.bank_out, &state.bank).map_err(io_err)?;
    files::save_coefficients_csv(&section.coeffs_out, &state.coeffs, &plan).map_err(io_err)?;

    let final_objective = state.objective_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained: m_final={} final_objective={final_objective:.6e} iterations={}",
        state.bank.active_count(),
        state.iteration
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// test

pub fn cmd_test(config: &RunConfig) -> Result<(), CliError> {
    let section: &TestSection = require(&config.test, "test")?;
    let bank = files::load_bank_json(&section.bank)
        .map_err(|e| io_err(format!("{}: {e}", section.bank.display())))?;
    let (data, sample_rate) = load_velocities(&section.dataset)?;
    if bank.active_count() == 0 {
        eprintln!("warning: the bank has no active synergies; every nonzero gesture scores error 1");
    }
    let control = SolverControl::new(
        section.max_iters,
        section.rel_tol,
        StepRule::FixedFromOperatorNorm,
    )
    .map_err(config_err)?;
    let (report, recons) = recon::evaluate_suite(
        &bank,
        &data,
        section.lambda_test,
        section.tau,
        section.smoothing,
        &control,
    )
    .map_err(numeric_err)?;

    files::save_report_json(&section.report_json, &report).map_err(io_err)?;
    files::save_report_csv(&section.report_csv, &report).map_err(io_err)?;
    if let Some(recon_out) = &section.recon_out {
        let v_hats: Vec<Vec<f64>> = recons.iter().map(|r| r.v_hat.clone()).collect();
        let reconstructed =
            VelocityDataset::new(data.joint_count(), data.window(), v_hats).map_err(numeric_err)?;
        dataio::save_velocity_csv(recon_out, &reconstructed, sample_rate).map_err(io_err)?;
    }

    match (report.mean_error, report.std_error) {
        (Some(mean), Some(std)) => println!(
            "test: gestures={} mean_error={mean:.4} std={std:.4} columns={}->{} m_active={}",
            report.per_task.len(),
            report.columns_total,
            report.columns_kept,
            report.m_active
        ),
        _ => println!("test: empty test set, mean undefined"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// postures

pub fn cmd_postures(config: &RunConfig) -> Result<(), CliError> {
    let section: &PosturesSection = require(&config.postures, "postures")?;
    let bank = files::load_bank_json(&section.bank)
        .map_err(|e| io_err(format!("{}: {e}", section.bank.display())))?;
    let n = bank.joint_count();
    let t_s = bank.template_len();
    let zeros = vec![0.0; n];
    let initial = match &section.initial_angles {
        Some(init) => {
            if init.len() != n {
                return Err(CliError::Config(format!(
                    "initial_angles has {} entries, the bank has n={n} joints",
                    init.len()
                )));
            }
            init.as_slice()
        }
        None => zeros.as_slice(),
    };
    for f in &section.fractions {
        if !(0.0..=1.0).contains(f) {
            return Err(CliError::Config(format!(
                "fractions must lie in [0, 1], got {f}"
            )));
        }
    }

    let active = bank.active_indices();
    let mut trajectories = Vec::new();
    for &j in &active {
        // Templates are joint-major; integration wants time-major.
        let template = bank.template(j);
        let mut velocity = vec![0.0; n * t_s];
        for i in 0..n {
            for u in 0..t_s {
                velocity[u * n + i] = template[i * t_s + u];
            }
        }
        let trajectory = dataio::integrate(&velocity, initial, section.sample_rate)
            .map_err(numeric_err)?;
        trajectories.push(trajectory);
    }

    let mut snapshots = String::from("synergy_id,fraction,t,joint_id,angle\n");
    for (row, &j) in active.iter().enumerate() {
        for &fraction in &section.fractions {
            let sample = ((fraction * (t_s - 1) as f64).round() as usize).min(t_s - 1);
            for i in 0..n {
                snapshots.push_str(&format!(
                    "{},{},{},{},{}\n",
                    j + 1,
                    fraction,
                    sample + 1,
                    i + 1,
                    trajectories[row].at(i, sample)
                ));
            }
        }
    }
    fs::write(&section.snapshots_out, snapshots).map_err(io_err)?;

    if trajectories.is_empty() {
        eprintln!("warning: the bank has no active synergies; no angle trajectories written");
    } else {
        dataio::save_angle_csv(&section.angles_out, &trajectories).map_err(io_err)?;
    }
    println!(
        "postures: synergies={} samples={} -> {}",
        active.len(),
        t_s,
        section.snapshots_out.display()
    );
    Ok(())
}
