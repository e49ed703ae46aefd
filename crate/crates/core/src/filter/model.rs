use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

use super::FilterError;

/// Constant-velocity state: position (m) and velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub p: Point2,
    pub v: Point2,
}

impl State {
    pub fn new(p: Point2, v: Point2) -> Self {
        Self { p, v }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.p.x, self.p.y, self.v.x, self.v.y)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self { p: Point2::new(v[0], v[1]), v: Point2::new(v[2], v[3]) }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite()
    }
}

/// Lower factor `L` with `L Lᵀ = m` for a symmetric PSD matrix.
///
/// Falls back to an eigendecomposition when `m` is singular.
pub(crate) fn psd_factor4(m: &Matrix4<f64>) -> Option<Matrix4<f64>> {
    if m.iter().all(|&v| v == 0.0) {
        return Some(Matrix4::zeros());
    }
    if let Some(c) = m.cholesky() {
        return Some(c.l());
    }
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return None;
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Some(eig.eigenvectors * Matrix4::from_diagonal(&sqrt))
}

fn is_symmetric<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale && m.iter().all(|v| v.is_finite())
}

/// Linear constant-velocity transition `p' = p + v·δt, v' = v` with additive
/// Gaussian noise of covariance `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    pub dt: f64,
    pub q: Matrix4<f64>,
    q_factor: Matrix4<f64>,
}

impl ProcessModel {
    pub fn new(dt: f64, q: Matrix4<f64>) -> Result<Self, FilterError> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(FilterError::Config(format!("time step must be nonnegative and finite, got {dt}")));
        }
        if !is_symmetric(&q) {
            return Err(FilterError::Config("process noise Q must be symmetric".into()));
        }
        let q_factor = psd_factor4(&q).ok_or_else(|| FilterError::Config("process noise Q must be positive semidefinite".into()))?;
        Ok(Self { dt, q, q_factor })
    }

    /// Discretized continuous white-noise acceleration with spectral density `σ_a²` per axis.
    pub fn white_acceleration(dt: f64, sigma_a: f64) -> Result<Self, FilterError> {
        if !(sigma_a >= 0.0 && sigma_a.is_finite()) {
            return Err(FilterError::Config(format!("acceleration noise must be nonnegative, got {sigma_a}")));
        }
        let s2 = sigma_a * sigma_a;
        let (a, b, c) = (dt.powi(3) / 3.0 * s2, dt.powi(2) / 2.0 * s2, dt * s2);
        #[rustfmt::skip]
        let q = Matrix4::new(
            a, 0.0, b, 0.0,
            0.0, a, 0.0, b,
            b, 0.0, c, 0.0,
            0.0, b, 0.0, c,
        );
        Self::new(dt, q)
    }

    /// Noise-free transition.
    pub fn propagate(&self, s: &State) -> State {
        State { p: s.p + s.v * self.dt, v: s.v }
    }

    /// Transition plus one draw of process noise.
    pub fn sample<R: Rng + ?Sized>(&self, s: &State, rng: &mut R) -> State {
        let n = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let e = self.q_factor * n;
        let mut out = self.propagate(s);
        out.p += Point2::new(e[0], e[1]);
        out.v += Point2::new(e[2], e[3]);
        out
    }
}

/// Position measurement `z = H x + e`, `e ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    pub r: Matrix2<f64>,
    r_inv: Matrix2<f64>,
    r_factor: Matrix2<f64>,
    log_norm: f64,
}

impl MeasurementModel {
    pub fn new(r: Matrix2<f64>) -> Result<Self, FilterError> {
        if !is_symmetric(&r) {
            return Err(FilterError::Config("measurement noise R must be symmetric".into()));
        }
        let chol = r.cholesky().ok_or_else(|| FilterError::Config("measurement noise R must be positive definite".into()))?;
        let r_factor = chol.l();
        let r_inv = chol.inverse();
        let log_det = 2.0 * (r_factor[(0, 0)].ln() + r_factor[(1, 1)].ln());
        let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        Ok(Self { r, r_inv, r_factor, log_norm })
    }

    /// Isotropic noise with standard deviation `std` meters per axis.
    pub fn isotropic(std: f64) -> Result<Self, FilterError> {
        Self::new(Matrix2::identity() * (std * std))
    }

    /// `H x`.
    pub fn predict(&self, s: &State) -> Point2 {
        s.p
    }

    /// `log N(z; H x, R)`.
    pub fn log_likelihood(&self, s: &State, z: Point2) -> f64 {
        let d = z - self.predict(s);
        let d = Vector2::new(d.x, d.y);
        self.log_norm - 0.5 * d.dot(&(self.r_inv * d))
    }

    /// One measurement draw for state `s`.
    pub fn sample<R: Rng + ?Sized>(&self, s: &State, rng: &mut R) -> Point2 {
        let n = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let e = self.r_factor * n;
        self.predict(s) + Point2::new(e[0], e[1])
    }

    pub fn factor(&self) -> &Matrix2<f64> {
        &self.r_factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn zero_noise_transition() {
        let m = ProcessModel::new(1.0, Matrix4::zeros()).unwrap();
        let s = State::new(Point2::ZERO, Point2::new(1.0, 2.0));
        let out = m.sample(&s, &mut seed::rng(1));
        assert_eq!(out, State::new(Point2::new(1.0, 2.0), Point2::new(1.0, 2.0)));
        let still = ProcessModel::new(0.0, Matrix4::zeros()).unwrap();
        assert_eq!(still.sample(&s, &mut seed::rng(1)), s);
    }

    #[test]
    fn white_acceleration_is_psd_and_factored() {
        let m = ProcessModel::white_acceleration(2.0, 0.3).unwrap();
        let l = psd_factor4(&m.q).unwrap();
        assert!((l * l.transpose() - m.q).amax() < 1e-14);
        assert!(m.q.cholesky().is_some());
    }

    #[test]
    fn singular_q_is_accepted() {
        let mut q = Matrix4::zeros();
        q[(0, 0)] = 4.0;
        let m = ProcessModel::new(1.0, q).unwrap();
        let l = psd_factor4(&m.q).unwrap();
        assert!((l * l.transpose() - q).amax() < 1e-12);
        let mut bad = Matrix4::zeros();
        bad[(0, 0)] = -1.0;
        assert!(ProcessModel::new(1.0, bad).is_err());
    }

    #[test]
    fn gaussian_likelihood_ratio() {
        let m = MeasurementModel::isotropic(2.0).unwrap();
        let at = State::new(Point2::ZERO, Point2::ZERO);
        let away = State::new(Point2::new(6.0, 0.0), Point2::ZERO);
        let ratio = (m.log_likelihood(&at, Point2::ZERO) - m.log_likelihood(&away, Point2::ZERO)).exp();
        assert!((ratio - 4.5f64.exp()).abs() < 1e-9 * ratio);
        // normalization of the density: log N(0; 0, 4I) = -ln(2π·4)
        assert!((m.log_likelihood(&at, Point2::ZERO) + (8.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }
}
