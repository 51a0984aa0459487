//! Scenario files, the run pipeline behind the `otess` binary, and the JSON
//! run report.

mod pipeline;
pub mod report;
pub mod scenario;

pub use pipeline::{derivative_agreement, run, ExitStatus, Outcome, RunError, RunOptions};
pub use report::{RunReport, SCHEMA_VERSION};
pub use scenario::{load_scenario, InputError, Mode, Scenario};
