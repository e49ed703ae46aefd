use crate::constitution::{Constitution, ConstitutionError, ConstitutionField};
use crate::geometry::Point2;

use super::model::State;
use super::FilterError;

/// Source of the constitutional likelihood `P(C | x, z)` for one particle.
///
/// Implementations must be pure: the filter evaluates particles in parallel.
pub trait ConstitutionEvaluator: Sync {
    fn probability(&self, state: &State, z: Point2) -> Result<f64, FilterError>;
}

/// The same probability everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEvaluator(pub f64);

impl ConstitutionEvaluator for ConstantEvaluator {
    fn probability(&self, _state: &State, _z: Point2) -> Result<f64, FilterError> {
        Ok(self.0)
    }
}

/// Field mode: bilinear lookup in a precomputed raster; 0 where the field is undefined.
impl ConstitutionEvaluator for ConstitutionField {
    fn probability(&self, state: &State, _z: Point2) -> Result<f64, FilterError> {
        Ok(self.value_or_zero(state.p))
    }
}

/// Direct mode: full inference per particle; 0 outside the StaR map.
impl ConstitutionEvaluator for Constitution {
    fn probability(&self, state: &State, z: Point2) -> Result<f64, FilterError> {
        match Constitution::probability(self, state.p, z) {
            Ok(p) => Ok(p),
            Err(ConstitutionError::OutOfBounds { .. }) => Ok(0.0),
            Err(e) => Err(e.into()),
        }
    }
}

impl<T: ConstitutionEvaluator + Send> ConstitutionEvaluator for std::sync::Arc<T> {
    fn probability(&self, state: &State, z: Point2) -> Result<f64, FilterError> {
        (**self).probability(state, z)
    }
}
