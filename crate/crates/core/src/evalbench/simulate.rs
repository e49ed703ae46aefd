use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constitution::ConstitutionField;
use crate::filter::{MeasurementModel, Measurement, State};
use crate::ingest::TrackSample;

use super::BenchError;

/// Consecutive rejected kicks after which an agent counts as stuck.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceMode {
    /// Kicks accepted with probability equal to the field value.
    Compliant,
    /// Kicks accepted with probability one minus the field value.
    Incompliant,
    /// Each agent is compliant or incompliant with equal probability.
    Mixed,
}

/// Motion parameters of a simulated agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub dt: f64,
    /// Standard deviation of each acceleration kick component (m/s²).
    pub sigma_a: f64,
    /// Rate (1/s) at which the velocity relaxes toward the cruise velocity.
    /// Zero gives a plain constant-velocity random walk.
    pub damping: f64,
}

/// Constant-velocity motion with Gaussian acceleration kicks, each kick
/// accepted by rejection sampling against the field at the resulting position.
///
/// The cruise velocity is the start velocity. Returns `steps + 1` samples
/// starting with `start` at `t = 0`.
pub fn simulate_agent<R: Rng + ?Sized>(
    field: &ConstitutionField,
    start: State,
    steps: usize,
    dynamics: Dynamics,
    mode: ComplianceMode,
    rng: &mut R,
) -> Result<Vec<TrackSample>, BenchError> {
    let Dynamics { dt, sigma_a, damping } = dynamics;
    if mode == ComplianceMode::Mixed {
        return Err(BenchError::Config("simulate a mixed population per agent, not per kick".into()));
    }
    let mut s = start;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrackSample { t: 0.0, p: s.p, v: s.v });
    for k in 1..=steps {
        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS {
            let ax: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_a;
            let ay: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_a;
            let a = crate::geometry::Point2::new(ax, ay) - (s.v - start.v) * damping;
            let p = s.p + s.v * dt + a * (0.5 * dt * dt);
            let f = field.value_or_zero(p);
            let accept = match mode {
                ComplianceMode::Compliant => f,
                _ => 1.0 - f,
            };
            if rng.random::<f64>() < accept {
                accepted = Some(State::new(p, s.v + a * dt));
                break;
            }
        }
        s = accepted.ok_or(BenchError::Stuck { step: k })?;
        out.push(TrackSample { t: k as f64 * dt, p: s.p, v: s.v });
    }
    Ok(out)
}

/// One noisy measurement per ground-truth sample.
pub fn measure<R: Rng + ?Sized>(truth: &[TrackSample], meas: &MeasurementModel, rng: &mut R) -> Vec<Measurement> {
    truth.iter().map(|s| Measurement { t: s.t, z: meas.sample(&State::new(s.p, s.v), rng) }).collect()
}
