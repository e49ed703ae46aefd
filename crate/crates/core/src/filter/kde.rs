use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::geometry::Point2;

use super::belief::ParticleBelief;
use super::evaluator::ConstitutionEvaluator;
use super::model::{MeasurementModel, State};
use super::FilterError;

/// Smallest kernel bandwidth, also used when every sample is identical.
pub const MIN_BANDWIDTH: f64 = 1e-3;

/// The set of constitution probabilities at sampled state–measurement pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutionSampleSet {
    pub values: Vec<f64>,
    pub states: Vec<State>,
    pub measurements: Vec<Point2>,
}

/// Draws `n` states by weight, one measurement per state, and evaluates `P(C | x, z)` at each.
pub fn sample_constitution_set<R: Rng + ?Sized>(
    belief: &ParticleBelief,
    meas: &MeasurementModel,
    evaluator: &dyn ConstitutionEvaluator,
    n: usize,
    rng: &mut R,
) -> Result<ConstitutionSampleSet, FilterError> {
    if n == 0 {
        return Err(FilterError::Config("sample count must be at least 1".into()));
    }
    let pick = WeightedIndex::new(&belief.weights).map_err(|e| FilterError::Internal(format!("belief weights: {e}")))?;
    let mut states = Vec::with_capacity(n);
    let mut measurements = Vec::with_capacity(n);
    for _ in 0..n {
        let s = belief.particles[pick.sample(rng)];
        measurements.push(meas.sample(&s, rng));
        states.push(s);
    }
    let values = states
        .iter()
        .zip(&measurements)
        .map(|(s, &z)| evaluator.probability(s, z).map(|p| p.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstitutionSampleSet { values, states, measurements })
}

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Silverman,
    Fixed(f64),
}

/// Gaussian-kernel density on `[0, 1]` with reflecting boundaries.
///
/// Reflection at both ends is equivalent to the kernel of the periodic images
/// `2k ± s`, which makes the density integrate to exactly 1 on the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `0.9 · min(σ̂, IQR/1.34) · n^(−1/5)`, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Builds the reflected KDE of the sample values.
pub fn kde_density(samples: &ConstitutionSampleSet, bandwidth: Bandwidth) -> Result<Kde, FilterError> {
    Kde::new(&samples.values, bandwidth)
}

impl Kde {
    pub fn new(values: &[f64], bandwidth: Bandwidth) -> Result<Self, FilterError> {
        if values.len() < 2 {
            return Err(FilterError::Config("density estimation needs at least two samples".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FilterError::Config("density samples must lie in [0, 1]".into()));
        }
        let h = match bandwidth {
            Bandwidth::Silverman => silverman_bandwidth(values),
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h.max(MIN_BANDWIDTH),
            Bandwidth::Fixed(h) => return Err(FilterError::Config(format!("bandwidth must be positive, got {h}"))),
        };
        Ok(Self { samples: values.to_vec(), bandwidth: h })
    }

    /// Density at `x`; zero outside `[0, 1]`.
    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let h = self.bandwidth;
        let reach = (10.0 * h / 2.0).ceil() as i64 + 1;
        let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
        let kernel = |d: f64| {
            let u = d / h;
            if u.abs() > 12.0 {
                0.0
            } else {
                (-0.5 * u * u).exp()
            }
        };
        let mut sum = 0.0;
        for &s in &self.samples {
            for k in -reach..=reach {
                let shift = 2.0 * k as f64;
                sum += kernel(x - (shift + s)) + kernel(x - (shift - s));
            }
        }
        sum * norm / self.samples.len() as f64
    }
}
