//! Simulation harness behind the `dropout-sgd-infer` binary. Every command
//! writes CSV files and is a pure function of its configuration and seed.

pub mod config;
pub mod contraction;
pub mod cov_convergence;
pub mod coverage;
pub mod csv;
pub mod traces;

pub use config::ExperimentConfig;
pub use contraction::cmd_contraction_table;
pub use cov_convergence::cmd_cov_convergence;
pub use coverage::{cmd_coverage, simulate_coverage, CoverageMode, CoverageReport, CoverageSpec};
pub use traces::cmd_traces;
