use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::geometry::Point2;
use crate::par;

use super::evaluator::ConstitutionEvaluator;
use super::model::{MeasurementModel, ProcessModel, State};
use super::FilterError;

/// Weighted particle approximation of the state posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief {
    pub particles: Vec<State>,
    pub weights: Vec<f64>,
}

/// Weighted mean and covariance of a belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: State,
    pub cov: Matrix4<f64>,
}

impl Estimate {
    pub fn cov_trace(&self) -> f64 {
        self.cov.trace()
    }
}

/// Diagnostics of a measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementStats {
    /// `ln Σ_i w_i N(z; H x_i, R)`, the log of the normalization constant.
    pub log_normalizer: f64,
}

/// Diagnostics of a constitution update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstitutionStats {
    /// Prior-weighted mean of `P(C | x, z)` over the particles.
    pub mean_probability: f64,
    /// Whether the blended factors differed and the weights were rescaled.
    pub reweighted: bool,
}

impl ParticleBelief {
    /// Equal-weight belief over `particles`.
    pub fn uniform(particles: Vec<State>) -> Self {
        let n = particles.len();
        Self { particles, weights: vec![1.0 / n as f64; n] }
    }

    /// `n` particles with positions from `N(center, pos_cov)` and velocities
    /// from `N(velocity, vel_std² I)`.
    pub fn gaussian<R: Rng + ?Sized>(
        n: usize,
        center: Point2,
        pos_factor: &nalgebra::Matrix2<f64>,
        velocity: Point2,
        vel_std: f64,
        rng: &mut R,
    ) -> Self {
        let particles = (0..n)
            .map(|_| {
                let e = pos_factor * nalgebra::Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
                let vx: f64 = rng.sample(StandardNormal);
                let vy: f64 = rng.sample(StandardNormal);
                State::new(center + Point2::new(e[0], e[1]), velocity + Point2::new(vx, vy) * vel_std)
            })
            .collect();
        Self::uniform(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Checks the weight simplex: nonnegative weights summing to 1 ± 1e−9.
    pub fn check(&self) -> Result<(), FilterError> {
        if self.particles.len() != self.weights.len() || self.particles.is_empty() {
            return Err(FilterError::Internal("particle and weight counts differ or are zero".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(FilterError::Internal("negative or NaN weight".into()));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(FilterError::Internal(format!("weights sum to {s}")));
        }
        Ok(())
    }

    /// Multiplies weights by `factors` and renormalizes; returns the pre-normalization mass.
    fn reweight(&mut self, factors: &[f64]) -> Result<f64, FilterError> {
        let mut mass = 0.0;
        for (w, &f) in self.weights.iter_mut().zip(factors) {
            *w *= f;
            mass += *w;
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(FilterError::Degenerate);
        }
        for w in &mut self.weights {
            *w /= mass;
        }
        Ok(mass)
    }
}

/// Advances every particle through the process model; weights are unchanged.
pub fn predict<R: Rng + ?Sized>(belief: &mut ParticleBelief, process: &ProcessModel, rng: &mut R) -> Result<(), FilterError> {
    for s in &mut belief.particles {
        *s = process.sample(s, rng);
        if !s.is_finite() {
            return Err(FilterError::Internal("non-finite particle after prediction".into()));
        }
    }
    Ok(())
}

/// Bayes update with the Gaussian measurement likelihood.
pub fn update_measurement(belief: &mut ParticleBelief, z: Point2, meas: &MeasurementModel) -> Result<MeasurementStats, FilterError> {
    let ll = par::map_slice(&belief.particles, |s| meas.log_likelihood(s, z));
    let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(FilterError::Degenerate);
    }
    let factors: Vec<f64> = ll.iter().map(|l| (l - max).exp()).collect();
    let mass = belief.reweight(&factors)?;
    Ok(MeasurementStats { log_normalizer: max + mass.ln() })
}

/// Constitutional update: each weight is multiplied by `τ·P(C|x,z) + (1 − τ)`.
///
/// When every factor is the same (in particular for `τ = 0`) the weights are
/// left untouched, so the update is an exact no-op.
pub fn update_constitution(
    belief: &mut ParticleBelief,
    z: Point2,
    evaluator: &dyn ConstitutionEvaluator,
    tau: f64,
) -> Result<ConstitutionStats, FilterError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(FilterError::Config(format!("trust ratio must lie in [0, 1], got {tau}")));
    }
    let probs = par::map_slice(&belief.particles, |s| evaluator.probability(s, z));
    let probs = probs.into_iter().collect::<Result<Vec<f64>, FilterError>>()?;
    let mean_probability = probs.iter().zip(&belief.weights).map(|(p, w)| p * w).sum();
    let factors: Vec<f64> = probs.iter().map(|&p| tau * p + (1.0 - tau)).collect();
    let first = factors[0];
    if first > 0.0 && factors.iter().all(|&f| f == first) {
        return Ok(ConstitutionStats { mean_probability, reweighted: false });
    }
    belief.reweight(&factors)?;
    Ok(ConstitutionStats { mean_probability, reweighted: true })
}

/// Effective sample size `1 / Σ w²`.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling indices: one uniform offset, `n` evenly spaced pointers.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// Systematic resampling to uniform weights.
pub fn resample<R: Rng + ?Sized>(belief: &mut ParticleBelief, rng: &mut R) {
    let n = belief.len();
    let idx = systematic_indices(&belief.weights, n, rng);
    belief.particles = idx.iter().map(|&i| belief.particles[i]).collect();
    belief.weights = vec![1.0 / n as f64; n];
}

/// Resamples when `ESS < threshold · N`; returns whether it did.
pub fn resample_if_needed<R: Rng + ?Sized>(belief: &mut ParticleBelief, threshold: f64, rng: &mut R) -> bool {
    if ess(&belief.weights) < threshold * belief.len() as f64 {
        resample(belief, rng);
        true
    } else {
        false
    }
}

/// Weighted mean and (biased, weight-normalized) covariance.
pub fn estimate(belief: &ParticleBelief) -> Estimate {
    let mut mean = Vector4::zeros();
    for (s, &w) in belief.particles.iter().zip(&belief.weights) {
        mean += s.to_vector() * w;
    }
    let mut cov = Matrix4::zeros();
    for (s, &w) in belief.particles.iter().zip(&belief.weights) {
        let d = s.to_vector() - mean;
        cov += d * d.transpose() * w;
    }
    Estimate { mean: State::from_vector(&mean), cov }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::ConstantEvaluator;
    use crate::seed;

    fn at(x: f64, y: f64) -> State {
        State::new(Point2::new(x, y), Point2::ZERO)
    }

    #[test]
    fn symmetric_measurement_update() {
        let mut b = ParticleBelief::uniform(vec![at(-1.0, 0.0), at(1.0, 0.0)]);
        update_measurement(&mut b, Point2::ZERO, &MeasurementModel::isotropic(1.0).unwrap()).unwrap();
        assert_eq!(b.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn flat_likelihood_keeps_prior() {
        let mut b = ParticleBelief { particles: vec![at(0.0, 0.0), at(1.0, 0.0)], weights: vec![0.3, 0.7] };
        update_measurement(&mut b, Point2::ZERO, &MeasurementModel::isotropic(1e3).unwrap()).unwrap();
        assert!((b.weights[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn full_trust_uses_probabilities() {
        struct ByX;
        impl ConstitutionEvaluator for ByX {
            fn probability(&self, s: &State, _z: Point2) -> Result<f64, FilterError> {
                Ok(if s.p.x < 0.5 { 0.8 } else { 0.2 })
            }
        }
        let mut b = ParticleBelief::uniform(vec![at(0.0, 0.0), at(1.0, 0.0)]);
        update_constitution(&mut b, Point2::ZERO, &ByX, 1.0).unwrap();
        assert!((b.weights[0] - 0.8).abs() < 1e-15 && (b.weights[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_factor_is_noop() {
        let w = vec![0.1, 0.2, 0.7];
        let mut b = ParticleBelief { particles: vec![at(0.0, 0.0); 3], weights: w.clone() };
        let stats = update_constitution(&mut b, Point2::ZERO, &ConstantEvaluator(0.0), 0.5).unwrap();
        assert!(!stats.reweighted);
        assert_eq!(b.weights, w);
        assert!(matches!(
            update_constitution(&mut b, Point2::ZERO, &ConstantEvaluator(0.0), 1.0),
            Err(FilterError::Degenerate)
        ));
    }

    #[test]
    fn resampling_cases() {
        let mut b = ParticleBelief::uniform(vec![at(0.0, 0.0), at(1.0, 0.0), at(2.0, 0.0)]);
        assert!(!resample_if_needed(&mut b, 0.5, &mut seed::rng(0)));
        let mut b = ParticleBelief { particles: vec![at(0.0, 0.0), at(1.0, 0.0), at(2.0, 0.0)], weights: vec![0.0, 1.0, 0.0] };
        assert!(resample_if_needed(&mut b, 0.5, &mut seed::rng(0)));
        assert!(b.particles.iter().all(|s| *s == at(1.0, 0.0)));
    }

    #[test]
    fn estimate_of_two_particles() {
        let b = ParticleBelief::uniform(vec![at(0.0, 0.0), at(2.0, 0.0)]);
        let e = estimate(&b);
        assert_eq!(e.mean.p, Point2::new(1.0, 0.0));
        assert_eq!(e.cov[(0, 0)], 1.0);
        let single = estimate(&ParticleBelief::uniform(vec![at(3.0, 4.0)]));
        assert_eq!(single.mean, at(3.0, 4.0));
        assert_eq!(single.cov, Matrix4::zeros());
    }
}
