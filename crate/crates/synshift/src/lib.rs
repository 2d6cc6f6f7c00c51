//! Joint learning of time-shifted kinematic synergies and their sparse
//! activation coefficients from multi-joint velocity recordings.
//!
//! The model represents each task's velocity trajectory as a superposition of
//! a few synergy templates, each recruited at a handful of integer time
//! shifts. Training alternates between a sparse group LASSO update of the
//! activation coefficients (decoupled across tasks) and a ridge update of
//! each synergy waveform; unused synergies are pruned automatically. A
//! trained bank reconstructs unseen movements through an l1 fit against the
//! bank of shifted templates.
//!
//! Module map:
//! - [`model`]: domain types and the matrix-free shift/dictionary operators;
//! - [`solvers`]: proximal gradient sparse group LASSO, l1, and CG ridge;
//! - [`amm`]: the alternating minimization engine;
//! - [`grid`]: hyperparameter grid search scored on held-out tasks;
//! - [`dataio`]: CSV ingestion, differentiation/integration, smoothing, and
//!   the synthetic ground-truth generator;
//! - [`recon`]: testing-phase reconstruction and its evaluation report;
//! - [`files`]: the on-disk JSON/CSV formats shared with the CLI.

pub mod amm;
pub mod dataio;
pub mod error;
pub mod files;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod recon;
pub mod solvers;

pub use error::{Error, Result};
