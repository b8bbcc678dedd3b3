//! Batch driver for Monte Carlo potential-theory scenarios.
//!
//! A scenario file (TOML or JSON) names an operator, a geometry, a path
//! budget, tolerances and a list of tasks. Running it writes
//! `<out>/<id>/report.json` and one CSV table per task; suites run many
//! scenarios on a bounded worker pool and add a `summary.csv`.

pub mod builtins;
pub mod config;
pub mod report;
pub mod run;
pub mod suite;
pub mod tasks;

pub use config::{ConfigError, Overrides, Scenario, Task};
pub use run::{run_parsed, run_scenario, RunOutcome, Status};
pub use suite::{run_suite, SuiteOutcome};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "LEVYPOT_OUT_DIR";
