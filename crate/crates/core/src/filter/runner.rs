use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::seed::{self, Rng};

use super::belief::{estimate, predict, resample_if_needed, update_constitution, update_measurement, ParticleBelief};
use super::config::FilterConfig;
use super::evaluator::ConstitutionEvaluator;
use super::kde::sample_constitution_set;
use super::model::{MeasurementModel, ProcessModel, State};
use super::FilterError;

/// A timestamped position measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub t: f64,
    pub z: Point2,
}

/// One JSON Lines record per filter step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub t: f64,
    /// `[px, py, vx, vy]`.
    pub estimate: [f64; 4],
    pub cov_trace: f64,
    pub ess: f64,
    pub log_normalizer: f64,
    pub mean_constitution_probability: Option<f64>,
    pub resampled: bool,
    pub reinitialized: bool,
    /// Mean of the diagnostic constitution sample set, when enabled.
    pub sample_mean: Option<f64>,
}

/// Result of running the filter over a measurement sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub steps: Vec<StepLog>,
    pub estimates: Vec<State>,
}

impl FilterRun {
    pub fn positions(&self) -> Vec<Point2> {
        self.estimates.iter().map(|s| s.p).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Particle filter with an optional constitutional update.
///
/// One step is predict → measurement update → constitution update →
/// resampling decision; the estimate is taken after resampling.
pub struct ParticleFilter<'a> {
    config: FilterConfig,
    meas: MeasurementModel,
    process: ProcessModel,
    evaluator: Option<&'a dyn ConstitutionEvaluator>,
    tau: f64,
    belief: ParticleBelief,
    rng: Rng,
    diag_rng: Rng,
    last_t: Option<f64>,
    step: usize,
}

impl<'a> ParticleFilter<'a> {
    /// `evaluator = None` gives the constitution-free baseline.
    pub fn new(config: &FilterConfig, evaluator: Option<&'a dyn ConstitutionEvaluator>, tau: f64, seed: u64) -> Result<Self, FilterError> {
        config.validate()?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(FilterError::Config(format!("trust ratio must lie in [0, 1], got {tau}")));
        }
        Ok(Self {
            meas: config.measurement_model()?,
            process: config.process_model(config.dt)?,
            config: config.clone(),
            evaluator,
            tau,
            belief: ParticleBelief::uniform(Vec::new()),
            rng: seed::rng(seed::derive(seed, "filter", 0)),
            diag_rng: seed::rng(seed::derive(seed, "filter-diagnostics", 0)),
            last_t: None,
            step: 0,
        })
    }

    pub fn belief(&self) -> &ParticleBelief {
        &self.belief
    }

    fn initialize(&mut self, z: Point2, velocity: VelocityPrior, inflation: f64) {
        let factor = self.meas.factor() * inflation;
        self.belief = ParticleBelief::gaussian(
            self.config.particles,
            z,
            &factor,
            velocity.mean,
            velocity.std * inflation,
            &mut self.rng,
        );
    }

    fn updates(&mut self, z: Point2) -> Result<(f64, Option<f64>), FilterError> {
        let ms = update_measurement(&mut self.belief, z, &self.meas)?;
        let mean_p = match self.evaluator {
            Some(ev) => Some(update_constitution(&mut self.belief, z, ev, self.tau)?.mean_probability),
            None => None,
        };
        Ok((ms.log_normalizer, mean_p))
    }

    /// Processes one measurement. The first call initializes the belief
    /// around it with `initial_velocity`.
    pub fn step(&mut self, m: Measurement, initial_velocity: VelocityPrior) -> Result<StepLog, FilterError> {
        let mut reinitialized = false;
        match self.last_t {
            None => self.initialize(m.z, initial_velocity, 1.0),
            Some(t0) => {
                let dt = m.t - t0;
                if !(dt >= 0.0) {
                    return Err(FilterError::Config(format!("measurement times must be nondecreasing ({t0} then {})", m.t)));
                }
                if dt != self.process.dt {
                    self.process = self.config.process_model(dt)?;
                }
                predict(&mut self.belief, &self.process, &mut self.rng)?;
            }
        }
        let (log_normalizer, mean_p) = match self.updates(m.z) {
            Ok(r) => r,
            Err(FilterError::Degenerate) if self.config.reinitialize => {
                log::warn!("degenerate update at step {}; reinitializing around the measurement", self.step);
                let v = crate::filter::estimate(&self.belief).mean.v;
                self.initialize(m.z, VelocityPrior { mean: v, std: initial_velocity.std }, 2.0);
                reinitialized = true;
                self.updates(m.z)?
            }
            Err(e) => return Err(e),
        };
        let ess = super::belief::ess(&self.belief.weights);
        let resampled = resample_if_needed(&mut self.belief, self.config.ess_threshold, &mut self.rng);
        let est = estimate(&self.belief);
        let sample_mean = match (self.config.sample_diagnostics, self.evaluator) {
            (true, Some(ev)) => {
                let set = sample_constitution_set(&self.belief, &self.meas, ev, self.config.constitution_samples, &mut self.diag_rng)?;
                Some(set.values.iter().sum::<f64>() / set.values.len() as f64)
            }
            _ => None,
        };
        let log = StepLog {
            step: self.step,
            t: m.t,
            estimate: [est.mean.p.x, est.mean.p.y, est.mean.v.x, est.mean.v.y],
            cov_trace: est.cov_trace(),
            ess,
            log_normalizer,
            mean_constitution_probability: mean_p,
            resampled,
            reinitialized,
            sample_mean,
        };
        self.last_t = Some(m.t);
        self.step += 1;
        Ok(log)
    }
}

/// Least-squares velocity over the leading measurement window, with its standard error.
pub fn initial_velocity(measurements: &[Measurement], config: &FilterConfig) -> VelocityPrior {
    let window = &measurements[..measurements.len().min(config.initial_velocity_window)];
    let n = window.len() as f64;
    let t_mean = window.iter().map(|m| m.t).sum::<f64>() / n;
    let sxx: f64 = window.iter().map(|m| (m.t - t_mean).powi(2)).sum();
    let mean = if sxx > 0.0 {
        let z_mean = window.iter().fold(Point2::ZERO, |acc, m| acc + m.z) * (1.0 / n);
        window.iter().fold(Point2::ZERO, |acc, m| acc + (m.z - z_mean) * (m.t - t_mean)) * (1.0 / sxx)
    } else {
        Point2::ZERO
    };
    let std = config.initial_velocity_std.unwrap_or_else(|| {
        let var = config.measurement_model().map(|m| m.r.trace() / 2.0).unwrap_or(0.0);
        // a single timestamp carries no velocity information; fall back to one nominal step
        let sxx = if sxx > 0.0 { sxx } else { config.dt * config.dt / 2.0 };
        (var / sxx).sqrt()
    });
    VelocityPrior { mean, std }
}

/// Gaussian prior on the initial velocity, isotropic with standard deviation `std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityPrior {
    pub mean: Point2,
    pub std: f64,
}

/// Runs the filter over every measurement and collects logs and estimates.
pub fn run_filter(
    config: &FilterConfig,
    measurements: &[Measurement],
    evaluator: Option<&dyn ConstitutionEvaluator>,
    tau: f64,
    seed: u64,
) -> Result<FilterRun, FilterError> {
    if measurements.is_empty() {
        return Err(FilterError::Config("no measurements to filter".into()));
    }
    let mut pf = ParticleFilter::new(config, evaluator, tau, seed)?;
    let v0 = initial_velocity(measurements, config);
    let mut steps = Vec::with_capacity(measurements.len());
    let mut estimates = Vec::with_capacity(measurements.len());
    for &m in measurements {
        let log = pf.step(m, v0)?;
        estimates.push(State::new(Point2::new(log.estimate[0], log.estimate[1]), Point2::new(log.estimate[2], log.estimate[3])));
        steps.push(log);
    }
    Ok(FilterRun { steps, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::ConstantEvaluator;

    fn line(n: usize) -> Vec<Measurement> {
        (0..n).map(|i| Measurement { t: i as f64 * 10.0, z: Point2::new(i as f64 * 30.0, 5.0) }).collect()
    }

    fn small() -> FilterConfig {
        FilterConfig { particles: 200, dt: 10.0, measurement_std: 10.0, ..Default::default() }
    }

    #[test]
    fn zero_trust_matches_baseline_exactly() {
        let ms = line(40);
        let base = run_filter(&small(), &ms, None, 0.0, 7).unwrap();
        let ev = ConstantEvaluator(0.3);
        let cofi = run_filter(&small(), &ms, Some(&ev), 0.0, 7).unwrap();
        assert_eq!(base.estimates, cofi.estimates);
    }

    #[test]
    fn tracks_a_straight_line() {
        let ms = line(40);
        let run = run_filter(&small(), &ms, None, 0.0, 3).unwrap();
        let last = run.estimates.last().unwrap();
        assert!(last.p.distance(ms.last().unwrap().z) < 15.0);
        assert!((last.v.x - 3.0).abs() < 1.0);
    }

    #[test]
    fn rejects_time_reversal() {
        let mut ms = line(3);
        ms[2].t = 0.0;
        assert!(run_filter(&small(), &ms, None, 0.0, 1).is_err());
    }
}
