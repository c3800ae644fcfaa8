//! Scenario configuration, Monte-Carlo orchestration and result emission
//! for the secure FMCW simulator.

pub mod comms;
pub mod config;
pub mod design;
pub mod error;
pub mod experiments;
pub mod sensing;
pub mod sweep;
pub mod table;

pub use config::ScenarioConfig;
pub use error::{SimError, SimResult};
pub use experiments::{run_scenario, Experiment, Scenario, ScenarioOutput};
pub use sweep::sweep;
pub use table::{ResultRow, ResultTable};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub mod simulator {}
}
