//! Sequential Monte Carlo tracking with a constitutional belief update.

mod belief;
mod config;
mod evaluator;
mod kde;
mod model;
mod runner;

use thiserror::Error;

use crate::constitution::ConstitutionError;

pub use belief::{
    ess, estimate, predict, resample, resample_if_needed, systematic_indices, update_constitution, update_measurement,
    ConstitutionStats, Estimate, MeasurementStats, ParticleBelief,
};
pub use config::{ConstitutionMode, FilterConfig, TauSource};
pub use evaluator::{ConstantEvaluator, ConstitutionEvaluator};
pub use kde::{kde_density, sample_constitution_set, silverman_bandwidth, Bandwidth, ConstitutionSampleSet, Kde, MIN_BANDWIDTH};
pub use model::{MeasurementModel, ProcessModel, State};
pub use runner::{initial_velocity, run_filter, FilterRun, Measurement, ParticleFilter, StepLog, VelocityPrior};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("filter configuration error: {0}")]
    Config(String),
    #[error("degenerate update: all particle weights are zero")]
    Degenerate,
    #[error(transparent)]
    Constitution(#[from] ConstitutionError),
    #[error("filter invariant violated: {0}")]
    Internal(String),
}
