//! Library surface of the batch CLI: the configuration schema and the
//! command implementations, exposed so integration tests (and fuzzing) can
//! drive them directly.

pub mod commands;
pub mod config;

pub use commands::{cmd_postures, cmd_synth, cmd_test, cmd_train, load_config, CliError};
pub use config::RunConfig;
