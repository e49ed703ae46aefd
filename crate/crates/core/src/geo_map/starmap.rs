use serde::{Deserialize, Serialize};

use crate::geometry::{GridSpec, Point2};
use crate::{par, raster};

use super::perturb::{sample_variant, PerturbationSet};
use super::relation::{eval_relation, RelationKind, RelationValue};
use super::{MapError, VectorMap};

/// Empirical mean and standard deviation of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Mean and unbiased standard deviation (1/(N−1) variance) of `values`.
pub fn sample_moments(values: &[f64]) -> Result<Moments, MapError> {
    let n = values.len();
    if n < 2 {
        return Err(MapError::Argument(format!("at least 2 samples are needed, got {n}")));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(Moments { mean: values[0], std: 0.0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Moments { mean, std: var.sqrt() })
}

fn draw_variants(map: &VectorMap, perturb: &PerturbationSet, n: usize, rng_seed: u64) -> Result<Vec<VectorMap>, MapError> {
    par::map_range(n, |i| sample_variant(map, perturb, rng_seed, i as u64)).into_iter().collect()
}

fn relation_samples(variants: &[VectorMap], rel: RelationKind, point: Point2, tag: &str) -> Result<Vec<f64>, CellError> {
    variants
        .iter()
        .map(|m| match eval_relation(m, rel, point, tag) {
            Ok(RelationValue::Value(v)) => Ok(v),
            Ok(RelationValue::NoFeature) => Err(CellError::NoFeature),
            Err(_) => Err(CellError::Domain),
        })
        .collect()
}

/// Estimates the moments of `rel(M⁽ⁿ⁾, point, tag)` over `n` map variants.
///
/// Uses variants `0..n` of the `rng_seed` sequence, the same ones
/// [`build_starmap`] uses, so a grid cell and a direct estimate at its center agree.
pub fn estimate_moments(
    map: &VectorMap,
    perturb: &PerturbationSet,
    rel: RelationKind,
    tag: &str,
    point: Point2,
    n: usize,
    rng_seed: u64,
) -> Result<Moments, MapError> {
    if n < 2 {
        return Err(MapError::Argument(format!("N must be at least 2, got {n}")));
    }
    let variants = draw_variants(map, perturb, n, rng_seed)?;
    let mut values = Vec::with_capacity(n);
    for m in &variants {
        match eval_relation(m, rel, point, tag)? {
            RelationValue::Value(v) => values.push(v),
            RelationValue::NoFeature => return Err(MapError::NoFeature(tag.to_string())),
        }
    }
    sample_moments(&values)
}

/// Why a raster cell holds no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellError {
    NoFeature,
    Domain,
}

/// A raster of `(mean, std)` for one `(relation, tag)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StarMapLayer {
    pub relation: RelationKind,
    pub tag: String,
    pub grid: GridSpec,
    pub sample_count: usize,
    /// Row-major; `NaN` where the cell is flagged.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub flags: Vec<Option<CellError>>,
}

impl StarMapLayer {
    pub fn is_flagged(&self, idx: usize) -> bool {
        self.flags[idx].is_some()
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_some()).count()
    }

    /// Stored moments of cell `idx`.
    pub fn cell(&self, idx: usize) -> Result<Moments, MapError> {
        match self.flags[idx] {
            None => Ok(Moments { mean: self.mean[idx], std: self.std[idx] }),
            Some(_) => Err(MapError::NoFeature(self.tag.clone())),
        }
    }

    /// Bilinear interpolation of mean and std from the surrounding cell centers.
    pub fn interpolate(&self, point: Point2) -> Result<Moments, MapError> {
        let s = raster::stencil(&self.grid, point).ok_or(MapError::OutOfBounds { x: point.x, y: point.y })?;
        if s.active().any(|i| self.is_flagged(i)) {
            return Err(match s.active().find_map(|i| self.flags[i]) {
                Some(CellError::Domain) => MapError::Domain(format!("{} layer '{}' flagged here", self.relation, self.tag)),
                _ => MapError::NoFeature(self.tag.clone()),
            });
        }
        Ok(Moments { mean: s.apply(&self.mean), std: s.apply(&self.std) })
    }

    fn check(&self) -> Result<(), MapError> {
        let n = self.grid.len();
        if self.mean.len() != n || self.std.len() != n || self.flags.len() != n {
            return Err(MapError::Invalid(format!("layer {}({}) does not match its grid", self.relation, self.tag)));
        }
        for i in 0..n {
            if self.flags[i].is_none() {
                let (m, s) = (self.mean[i], self.std[i]);
                if !(s >= 0.0) || !m.is_finite() || (self.relation == RelationKind::Over && !(0.0..=1.0).contains(&m)) {
                    return Err(MapError::Invalid(format!(
                        "layer {}({}) cell {i} holds invalid moments ({m}, {s})",
                        self.relation, self.tag
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A collection of layers over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StarMap {
    pub grid: GridSpec,
    pub sample_count: usize,
    pub seed: u64,
    pub layers: Vec<StarMapLayer>,
}

impl StarMap {
    pub fn layer(&self, rel: RelationKind, tag: &str) -> Option<&StarMapLayer> {
        self.layers.iter().find(|l| l.relation == rel && l.tag == tag)
    }

    pub fn to_json(&self) -> Result<String, MapError> {
        let doc = StarMapDoc {
            bbox: [self.grid.bbox.min_x, self.grid.bbox.min_y, self.grid.bbox.max_x, self.grid.bbox.max_y],
            resolution: [self.grid.rows, self.grid.cols],
            sample_count: self.sample_count,
            seed: self.seed,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    relation: l.relation,
                    tag: l.tag.clone(),
                    mean: l.flags.iter().zip(&l.mean).map(|(f, v)| f.is_none().then_some(*v)).collect(),
                    std: l.flags.iter().zip(&l.std).map(|(f, v)| f.is_none().then_some(*v)).collect(),
                    flags: l.flags.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| MapError::Invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let doc: StarMapDoc = serde_json::from_str(text).map_err(|e| MapError::Parse(format!("StaR map JSON: {e}")))?;
        let [min_x, min_y, max_x, max_y] = doc.bbox;
        let grid = GridSpec::new(crate::geometry::BBox::new(min_x, min_y, max_x, max_y), doc.resolution[0], doc.resolution[1]);
        grid.validate().map_err(MapError::Invalid)?;
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let n = l.mean.len();
                let flags = if l.flags.len() == n {
                    l.flags
                } else {
                    l.mean.iter().map(|m| m.is_none().then_some(CellError::NoFeature)).collect()
                };
                let layer = StarMapLayer {
                    relation: l.relation,
                    tag: l.tag,
                    grid,
                    sample_count: doc.sample_count,
                    mean: l.mean.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                    std: l.std.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                    flags,
                };
                layer.check()?;
                Ok(layer)
            })
            .collect::<Result<Vec<_>, MapError>>()?;
        Ok(StarMap { grid, sample_count: doc.sample_count, seed: doc.seed, layers })
    }
}

#[derive(Serialize, Deserialize)]
struct StarMapDoc {
    bbox: [f64; 4],
    resolution: [usize; 2],
    sample_count: usize,
    seed: u64,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    relation: RelationKind,
    tag: String,
    mean: Vec<Option<f64>>,
    std: Vec<Option<f64>>,
    #[serde(default)]
    flags: Vec<Option<CellError>>,
}

/// Builds one layer per `(relation, tag)` with moments at every cell center.
///
/// The same `n` map variants are shared by all cells and layers. Cells where
/// the relation cannot be evaluated are flagged rather than aborting the build.
pub fn build_starmap(
    map: &VectorMap,
    perturb: &PerturbationSet,
    relations: &[(RelationKind, String)],
    grid: GridSpec,
    n: usize,
    rng_seed: u64,
) -> Result<StarMap, MapError> {
    grid.validate().map_err(MapError::Argument)?;
    if n < 2 {
        return Err(MapError::Argument(format!("N must be at least 2, got {n}")));
    }
    let variants = draw_variants(map, perturb, n, rng_seed)?;
    let layers = relations
        .iter()
        .map(|(rel, tag)| {
            let cells = par::map_range(grid.len(), |idx| {
                relation_samples(&variants, *rel, grid.center_of(idx), tag)
                    .map(|vals| sample_moments(&vals).expect("n >= 2"))
            });
            let mut layer = StarMapLayer {
                relation: *rel,
                tag: tag.clone(),
                grid,
                sample_count: n,
                mean: Vec::with_capacity(grid.len()),
                std: Vec::with_capacity(grid.len()),
                flags: Vec::with_capacity(grid.len()),
            };
            for c in cells {
                match c {
                    Ok(m) => {
                        layer.mean.push(m.mean);
                        layer.std.push(m.std);
                        layer.flags.push(None);
                    }
                    Err(e) => {
                        layer.mean.push(f64::NAN);
                        layer.std.push(f64::NAN);
                        layer.flags.push(Some(e));
                    }
                }
            }
            layer
        })
        .collect();
    Ok(StarMap { grid, sample_count: n, seed: rng_seed, layers })
}

/// Bilinear interpolation of a layer; see [`StarMapLayer::interpolate`].
pub fn interpolate(layer: &StarMapLayer, point: Point2) -> Result<Moments, MapError> {
    layer.interpolate(point)
}
