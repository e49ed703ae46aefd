use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// Mean Earth radius (m) of the spherical model.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection onto the tangent frame at `(lat0, lon0)`:
/// `x = R·Δλ·cos φ₀`, `y = R·Δφ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentProjection {
    pub lat0: f64,
    pub lon0: f64,
}

impl TangentProjection {
    pub fn new(lat0: f64, lon0: f64) -> Self {
        Self { lat0, lon0 }
    }

    /// Projection centered on the middle of a lat/lon box.
    pub fn centered(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Self {
        Self::new(0.5 * (min_lat + max_lat), 0.5 * (min_lon + max_lon))
    }

    fn k(&self) -> f64 {
        self.lat0.to_radians().cos()
    }

    pub fn project(&self, lat: f64, lon: f64) -> Point2 {
        let mut dlon = lon - self.lon0;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        Point2::new(EARTH_RADIUS_M * dlon.to_radians() * self.k(), EARTH_RADIUS_M * (lat - self.lat0).to_radians())
    }

    /// Inverse of [`project`](Self::project): returns `(lat, lon)`.
    pub fn unproject(&self, p: Point2) -> (f64, f64) {
        let lat = self.lat0 + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon0 + (p.x / (EARTH_RADIUS_M * self.k())).to_degrees();
        (lat, lon)
    }
}

/// Great-circle distance (haversine) on the spherical model.
pub fn great_circle_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_and_north_offset() {
        let p = TangentProjection::new(40.7, -74.0);
        assert_eq!(p.project(40.7, -74.0), Point2::ZERO);
        let north = p.project(40.71, -74.0);
        // arc length of 0.01° on a 6371 km sphere
        let arc = EARTH_RADIUS_M * 0.01f64.to_radians();
        assert!((north.y - arc).abs() < 1e-6 && north.x == 0.0);
        assert!((north.y - 1111.95).abs() < 0.5);
    }

    #[test]
    fn round_trip() {
        let p = TangentProjection::new(-33.9, 151.2);
        for &(lat, lon) in &[(-33.95, 151.1), (-33.8, 151.3), (-33.9, 151.2)] {
            let (a, b) = p.unproject(p.project(lat, lon));
            assert!((a - lat).abs() < 1e-9 && (b - lon).abs() < 1e-9);
        }
    }
}
