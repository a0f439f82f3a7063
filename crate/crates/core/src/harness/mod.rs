//! Scenario configuration, execution and CSV output.

mod config;
mod run;
pub mod selftest;

pub use config::{parse_config, AdaptiveSpec, Scenario, Sweep, TopologySpec};
pub use run::{run_scenario, ResultTables};
