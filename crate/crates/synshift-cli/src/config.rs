//! The single JSON configuration document driving every subcommand. One file
//! per run; sections are optional and each command requires its own.

use std::path::PathBuf;

use serde::Deserialize;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Worker thread cap; overridden by --threads, then SYNERGY_THREADS.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub test: Option<TestSection>,
    #[serde(default)]
    pub postures: Option<PosturesSection>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, String> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("invalid configuration: {e}"))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {}, expected {CONFIG_SCHEMA_VERSION}",
                config.schema_version
            ));
        }
        Ok(config)
    }
}

fn default_sample_rate() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n: usize,
    pub t: usize,
    pub t_s: usize,
    pub g: usize,
    pub m_true: usize,
    pub active_shifts_per_task: usize,
    /// dB; omit (or null) for noiseless data.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub amplitude_range: [f64; 2],
    pub seed: u64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    pub dataset_out: PathBuf,
    pub truth_out: PathBuf,
}

fn default_max_outer_iters() -> usize {
    200
}
fn default_outer_rel_tol() -> f64 {
    1e-5
}
fn default_prune_eps() -> f64 {
    1e-8
}
fn default_inner_max_iters() -> usize {
    5000
}
fn default_inner_rel_tol() -> f64 {
    1e-6
}
fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}
fn default_patience() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: PathBuf,
    pub m_int: usize,
    pub t_s: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default = "default_max_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default = "default_outer_rel_tol")]
    pub outer_rel_tol: f64,
    #[serde(default = "default_prune_eps")]
    pub prune_eps: f64,
    #[serde(default = "default_inner_max_iters")]
    pub inner_max_iters: usize,
    #[serde(default = "default_inner_rel_tol")]
    pub inner_rel_tol: f64,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default = "default_one")]
    pub normalize_every: usize,
    #[serde(default = "default_patience")]
    pub inactive_patience: usize,
    #[serde(default)]
    pub sqrt_group_weighting: bool,
    pub bank_out: PathBuf,
    pub coeffs_out: PathBuf,
    pub trace_out: PathBuf,
    /// When present, sweep the grid, write one bank per point plus a
    /// selection summary, and train the final bank with the winner.
    #[serde(default)]
    pub grid: Option<GridSection>,
}

fn default_holdout() -> f64 {
    0.2
}
fn default_tau() -> f64 {
    0.8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub alpha: Vec<f64>,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    pub validation_lambda_test: f64,
    #[serde(default = "default_tau")]
    pub validation_tau: f64,
    pub summary_out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSection {
    pub bank: PathBuf,
    pub dataset: PathBuf,
    pub lambda_test: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Savitzky-Golay (window, polyorder) for the bank columns; omit to skip.
    #[serde(default)]
    pub smoothing: Option<(usize, usize)>,
    #[serde(default = "default_inner_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_inner_rel_tol")]
    pub rel_tol: f64,
    pub report_json: PathBuf,
    pub report_csv: PathBuf,
    /// Reconstructed velocities in the dataset CSV layout, for plotting.
    #[serde(default)]
    pub recon_out: Option<PathBuf>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosturesSection {
    pub bank: PathBuf,
    /// Starting joint angles; zeros when omitted.
    #[serde(default)]
    pub initial_angles: Option<Vec<f64>>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    /// Full per-synergy angle trajectories (dataset CSV layout, kind=angles).
    pub angles_out: PathBuf,
    /// Snapshot table at the requested fractions of the synergy duration.
    pub snapshots_out: PathBuf,
}
