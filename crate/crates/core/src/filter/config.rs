use std::path::PathBuf;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::model::{MeasurementModel, ProcessModel};
use super::FilterError;

/// Where the trust ratio comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    Fixed(f64),
    /// A calibrated trust table, looked up by the track's trust features.
    TrustTable(PathBuf),
}

/// How `P(C | x, z)` is obtained per particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstitutionMode {
    /// Full inference for every particle at every step.
    Direct,
    /// Bilinear lookup in a precomputed field.
    #[default]
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub particles: usize,
    /// Nominal time step (s), used when measurements carry no usable spacing.
    pub dt: f64,
    /// White-acceleration noise density (m/s²).
    pub sigma_a: f64,
    /// Isotropic measurement noise (m); ignored when `measurement_cov` is set.
    pub measurement_std: f64,
    pub measurement_cov: Option<[[f64; 2]; 2]>,
    /// Resample when `ESS < ess_threshold · N`.
    pub ess_threshold: f64,
    pub tau: TauSource,
    pub mode: ConstitutionMode,
    /// Size of the per-step sample set used for diagnostics.
    pub constitution_samples: usize,
    /// Whether to draw the diagnostic sample set each step.
    pub sample_diagnostics: bool,
    /// Number of leading measurements whose least-squares slope gives the
    /// initial velocity.
    pub initial_velocity_window: usize,
    /// Initial velocity spread (m/s). `None` uses the standard error of the
    /// slope under the measurement noise.
    pub initial_velocity_std: Option<f64>,
    /// Reinitialize around the measurement instead of failing on a degenerate update.
    pub reinitialize: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 2000,
            dt: 60.0,
            sigma_a: 0.05,
            measurement_std: 50.0,
            measurement_cov: None,
            ess_threshold: 0.5,
            tau: TauSource::Fixed(0.0),
            mode: ConstitutionMode::Field,
            constitution_samples: 100,
            sample_diagnostics: false,
            initial_velocity_window: 5,
            initial_velocity_std: None,
            reinitialize: true,
        }
    }
}

impl FilterConfig {
    pub fn from_json(text: &str) -> Result<Self, FilterError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FilterError::Config(format!("filter config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |m: String| Err(FilterError::Config(m));
        if self.particles == 0 {
            return bad("particle count must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.ess_threshold >= 0.0 && self.ess_threshold <= 1.0) {
            return bad(format!("ess_threshold must lie in [0, 1], got {}", self.ess_threshold));
        }
        if let TauSource::Fixed(t) = self.tau {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("tau must lie in [0, 1], got {t}"));
            }
        }
        if self.sample_diagnostics && self.constitution_samples < 2 {
            return bad("constitution_samples must be at least 2 for diagnostics".into());
        }
        if self.initial_velocity_window < 2 {
            return bad("initial_velocity_window must be at least 2".into());
        }
        if self.initial_velocity_std.is_some_and(|s| !(s >= 0.0)) {
            return bad("initial_velocity_std must be nonnegative".into());
        }
        self.measurement_model()?;
        self.process_model(self.dt)?;
        Ok(())
    }

    pub fn measurement_model(&self) -> Result<MeasurementModel, FilterError> {
        match self.measurement_cov {
            Some([[a, b], [c, d]]) => MeasurementModel::new(Matrix2::new(a, b, c, d)),
            None if self.measurement_std > 0.0 => MeasurementModel::isotropic(self.measurement_std),
            None => Err(FilterError::Config(format!("measurement_std must be positive, got {}", self.measurement_std))),
        }
    }

    pub fn process_model(&self, dt: f64) -> Result<ProcessModel, FilterError> {
        ProcessModel::white_acceleration(dt, self.sigma_a)
    }
}
