//! Configuration, dispatch and reports for the command-line tool.

mod config;
mod run;

pub use crate::rng::{seed_schedule, TaskKind};
pub use config::{Command, ConfigFile, ExperimentConfig, OutputFormat};
pub use run::{
    check_all, default_hdl_test_function, exit_code, run, RunReport, EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS,
    EXIT_RUNTIME,
};
