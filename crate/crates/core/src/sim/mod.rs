//! Scenario files, disturbance sampling and Monte Carlo evaluation.

pub mod builtin;
pub mod feasible;
pub mod noise;
pub mod output;
pub mod run;
pub mod scenario;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use feasible::{feasible_set_scan, FeasibleScan, GridAxis, GridError};
pub use noise::{sample_noise, NoiseError, NoiseFamily, NoiseSpec};
pub use run::{
    monte_carlo, simulate_run, trace_sw, MonteCarloResult, RunRecord, StepRecord, Termination,
    ViolationStats,
};
pub use scenario::{Scenario, ScenarioError, ScenarioFile, SCHEMA_VERSION};
