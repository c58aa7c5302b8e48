//! Scenario-driven simulation: schema, event log, engine, and metrics.

pub mod engine;
pub mod events;
pub mod metrics;
pub mod scenario;

pub use engine::{attribution_slack, run_simulation, run_simulation_with_seed, SimOutput};
pub use events::{EventLog, EventLogError, LogRecord};
pub use metrics::{compute_accuracy, metrics_from_log, MetricsError, MetricsReport, SetOutcome};
pub use scenario::{Fault, Scenario, ScenarioError, WorkoutSet};
