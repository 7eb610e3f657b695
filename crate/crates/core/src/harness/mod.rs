//! Scenario files, experiment orchestration and CSV artifacts.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{Layout, ScenarioConfig, ScenarioKind};
pub use output::{summarize_dir, write_data, write_run, write_runs};
pub use scenario::{build_forward, generate_data, run_chain, run_chains, DataSet, Forward, RunResult};
