//! Config-driven experiments on the injection-based output feedback example:
//! single closed-loop runs, order studies and the noise study, emitted as CSV
//! plus TOML summaries.

pub mod config;
pub mod noise_study;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use config::{ConfigError, Scenario};
pub use scenario::{run_scenario, Metrics, RunResult};
pub use sweep::{run_order_study, OrderStudy};
