//! Library side of the `depthscale` command-line tool: argument types,
//! command execution and report rendering.

pub mod args;
mod commands;
pub mod report;

pub use commands::{
    compare_rows, exit_code_for, run, CliError, EXIT_DATA, EXIT_DIVERGED, EXIT_INFEASIBLE,
    EXIT_USAGE, OUT_DIR_ENV,
};
