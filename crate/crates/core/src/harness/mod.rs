//! Scenario files, experiment runners and result files.

pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;

pub use config::ScenarioConfig;
pub use experiments::{run_case_study, run_detection_sweep, run_eve_mode_comparison, run_tradeoff_sweep};
pub use output::{emit_results, ExperimentResult, Format};
