use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::seed;

use super::{MapError, VectorMap};

/// Distribution over the linear part of a feature's rigid perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearMapDist {
    #[default]
    Identity,
    /// Rotation about the frame origin by an angle ~ N(0, std²).
    Rotation { std_rad: f64 },
    /// Isotropic scaling by a factor ~ N(1, std²).
    Scale { std: f64 },
    /// Scaling followed by rotation, drawn independently.
    RotationScale { rotation_std_rad: f64, scale_std: f64 },
}

impl LinearMapDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [[f64; 2]; 2] {
        let (rot_std, scale_std) = match *self {
            LinearMapDist::Identity => (0.0, 0.0),
            LinearMapDist::Rotation { std_rad } => (std_rad, 0.0),
            LinearMapDist::Scale { std } => (0.0, std),
            LinearMapDist::RotationScale { rotation_std_rad, scale_std } => (rotation_std_rad, scale_std),
        };
        // always draw both so that the stream layout is the same for every family
        let zr: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        if rot_std == 0.0 && scale_std == 0.0 {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let theta = rot_std * zr;
        let s = 1.0 + scale_std * zs;
        let (sin, cos) = theta.sin_cos();
        [[s * cos, -s * sin], [s * sin, s * cos]]
    }
}

/// Per-feature perturbation: a random linear map followed by a Gaussian translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePerturbation {
    pub linear: LinearMapDist,
    pub translation_mean: Point2,
    /// Row-major 2×2 covariance in m².
    pub translation_cov: [[f64; 2]; 2],
}

impl Default for FeaturePerturbation {
    fn default() -> Self {
        Self::identity()
    }
}

impl FeaturePerturbation {
    pub fn identity() -> Self {
        Self { linear: LinearMapDist::Identity, translation_mean: Point2::ZERO, translation_cov: [[0.0; 2]; 2] }
    }

    /// Isotropic translation noise with standard deviation `std_m` meters.
    pub fn translation(std_m: f64) -> Self {
        let v = std_m * std_m;
        Self { translation_cov: [[v, 0.0], [0.0, v]], ..Self::identity() }
    }

    /// A fixed translation.
    pub fn shift(by: Point2) -> Self {
        Self { translation_mean: by, ..Self::identity() }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let [[a, b], [c, d]] = self.translation_cov;
        if b != c {
            return Err(MapError::Config("translation covariance must be symmetric".into()));
        }
        if !(a >= 0.0 && d >= 0.0 && a * d - b * c >= -1e-12 * (a * d).max(1.0)) {
            return Err(MapError::Config("translation covariance must be positive semidefinite".into()));
        }
        let stds = match self.linear {
            LinearMapDist::Identity => vec![],
            LinearMapDist::Rotation { std_rad } => vec![std_rad],
            LinearMapDist::Scale { std } => vec![std],
            LinearMapDist::RotationScale { rotation_std_rad, scale_std } => vec![rotation_std_rad, scale_std],
        };
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(MapError::Config("linear map spread must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Lower-triangular factor of the translation covariance.
    fn cholesky(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.translation_cov;
        if a <= 0.0 {
            return [[0.0, 0.0], [0.0, d.max(0.0).sqrt()]];
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        [[l11, 0.0], [l21, (d - l21 * l21).max(0.0).sqrt()]]
    }

    /// Draws `(Φ, t)` for one map variant.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ([[f64; 2]; 2], Point2) {
        let phi = self.linear.sample(rng);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let l = self.cholesky();
        let t = Point2::new(
            self.translation_mean.x + l[0][0] * z1,
            self.translation_mean.y + l[1][0] * z1 + l[1][1] * z2,
        );
        (phi, t)
    }
}

/// One perturbation per feature of a specific map.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    per_feature: Vec<FeaturePerturbation>,
}

impl PerturbationSet {
    pub fn new(per_feature: Vec<FeaturePerturbation>) -> Result<Self, MapError> {
        for p in &per_feature {
            p.validate()?;
        }
        Ok(Self { per_feature })
    }

    /// The same perturbation for every feature of `map`.
    pub fn uniform(map: &VectorMap, p: FeaturePerturbation) -> Result<Self, MapError> {
        Self::new(vec![p; map.feature_count()])
    }

    pub fn get(&self, feature: usize) -> Option<&FeaturePerturbation> {
        self.per_feature.get(feature)
    }

    pub fn len(&self) -> usize {
        self.per_feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_feature.is_empty()
    }
}

/// Spread parameters for one tag pattern in the JSON perturbation config.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub translation_std_m: f64,
    #[serde(default)]
    pub rotation_std_rad: f64,
    #[serde(default)]
    pub scale_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_mean_m: Option<[f64; 2]>,
}

impl PerturbationSpec {
    pub fn to_feature(&self) -> FeaturePerturbation {
        let mut p = FeaturePerturbation::translation(self.translation_std_m);
        if let Some([x, y]) = self.translation_mean_m {
            p.translation_mean = Point2::new(x, y);
        }
        p.linear = match (self.rotation_std_rad > 0.0, self.scale_std > 0.0) {
            (false, false) => LinearMapDist::Identity,
            (true, false) => LinearMapDist::Rotation { std_rad: self.rotation_std_rad },
            (false, true) => LinearMapDist::Scale { std: self.scale_std },
            (true, true) => LinearMapDist::RotationScale {
                rotation_std_rad: self.rotation_std_rad,
                scale_std: self.scale_std,
            },
        };
        p
    }
}

/// Perturbation config: tag pattern → spread. Patterns are tags with
/// optional `*` wildcards.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerturbationConfig(pub BTreeMap<String, PerturbationSpec>);

impl PerturbationConfig {
    pub fn from_json(text: &str) -> Result<Self, MapError> {
        serde_json::from_str(text).map_err(|e| MapError::Config(format!("perturbation config: {e}")))
    }

    /// Resolves one perturbation per feature.
    ///
    /// A feature takes the spec of the most specific pattern matching any of
    /// its tags: an exact tag beats a wildcard, and among wildcards the one
    /// with more literal characters wins (ties broken by pattern order).
    pub fn resolve(&self, map: &VectorMap) -> Result<PerturbationSet, MapError> {
        let mut out = Vec::with_capacity(map.feature_count());
        for f in 0..map.feature_count() {
            let tags = map.tags_of_feature(f);
            let best = self
                .0
                .iter()
                .filter(|(pat, _)| tags.iter().any(|t| wildcard_match(pat, t)))
                .max_by_key(|(pat, _)| (!pat.contains('*'), pat.chars().filter(|&c| c != '*').count(), std::cmp::Reverse(*pat)));
            match best {
                Some((_, spec)) => out.push(spec.to_feature()),
                None => {
                    return Err(MapError::Config(format!(
                        "no perturbation entry matches feature {f} with tags {tags:?}"
                    )))
                }
            }
        }
        PerturbationSet::new(out)
    }
}

fn wildcard_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

/// Draws map variant `index` of the sequence seeded by `rng_seed`.
///
/// Variant `n` depends only on `(rng_seed, n)`, so variants can be generated
/// in any order or in parallel.
pub fn sample_variant(map: &VectorMap, perturb: &PerturbationSet, rng_seed: u64, index: u64) -> Result<VectorMap, MapError> {
    if perturb.len() < map.feature_count() {
        return Err(MapError::Config(format!(
            "perturbation set covers {} features but the map has {}",
            perturb.len(),
            map.feature_count()
        )));
    }
    let mut rng = seed::rng(seed::derive(rng_seed, "map-variant", index));
    let draws: Vec<([[f64; 2]; 2], Point2)> =
        (0..map.feature_count()).map(|f| perturb.per_feature[f].sample(&mut rng)).collect();
    let vertices = map
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (phi, t) = &draws[map.feature_of_vertex(i)];
            Point2::new(phi[0][0] * v.x + phi[0][1] * v.y + t.x, phi[1][0] * v.x + phi[1][1] * v.y + t.y)
        })
        .collect();
    Ok(map.with_vertices(vertices))
}

/// Draws one map variant with Φ and t sampled once per feature.
pub fn sample_map_variant(map: &VectorMap, perturb: &PerturbationSet, rng_seed: u64) -> Result<VectorMap, MapError> {
    sample_variant(map, perturb, rng_seed, 0)
}
