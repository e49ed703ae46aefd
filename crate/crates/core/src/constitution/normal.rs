use libm::erfc;

use super::ast::Region;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(x)`, computed without cancellation.
fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(a ≤ Y ≤ b)` for `Y ~ N(mean, std²)` with `a ≤ b` (either may be infinite).
pub fn normal_interval(mean: f64, std: f64, a: f64, b: f64) -> f64 {
    let za = (a - mean) / std;
    let zb = (b - mean) / std;
    // difference of whichever tails are small, to keep precision far from the mean
    let p = if za >= 0.0 {
        std_normal_sf(za) - std_normal_sf(zb)
    } else if zb <= 0.0 {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        1.0 - std_normal_cdf(za) - std_normal_sf(zb)
    };
    p.clamp(0.0, 1.0)
}

/// Probability that `Y ~ N(mean, std²)` falls in `region`.
///
/// Strict and non-strict bounds coincide for a continuous distribution.
pub fn region_probability(mean: f64, std: f64, region: Region) -> f64 {
    match region {
        Region::Lt(b) | Region::Le(b) => normal_interval(mean, std, f64::NEG_INFINITY, b),
        Region::Gt(b) | Region::Ge(b) => normal_interval(mean, std, b, f64::INFINITY),
        Region::Between(lo, hi) => normal_interval(mean, std, lo, hi),
    }
}
