//! Synthetic agents, the baseline-versus-constitution ablation, and metrics.

mod ablation;
mod metric;
mod scenario;
mod simulate;

use thiserror::Error;

pub use ablation::{calibrate_scenario, run_ablation, run_benchmark, synthetic_bucket, ArmSummary, MetricReport, SeedRow};
pub use metric::{mae, summarize, Summary};
pub use scenario::{
    corridor_polygon, AgentSpec, CalibrationSpec, CorridorSpec, Scenario, ScenarioSpec, StarMapSpec, CORRIDOR_CONSTITUTION,
};
pub use simulate::{measure, simulate_agent, ComplianceMode, Dynamics, MAX_REJECTIONS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("agent stuck at step {step}: every kick was rejected")]
    Stuck { step: usize },
    #[error("scenario configuration error: {0}")]
    Config(String),
}
