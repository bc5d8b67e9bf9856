//! Scenario library, config-driven sweeps, result files and the named
//! verification checks.

pub mod checks;
pub mod experiment;
pub mod report;
pub mod scenario;

pub use checks::{run_check, CheckConfig, CheckOutcome, CHECKS};
pub use experiment::{run_experiment, ExperimentConfig, Format, MethodSpec, OutputSpec, ResultRow, ResultTable, ScenarioRef};
pub use report::{emit_report, load_table};
pub use scenario::{build_scenario, Scenario, ScenarioParams, SCENARIOS};
