use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, GridSpec, Point2};
use crate::par;
use crate::raster;

use super::bind::Constitution;
use super::ConstitutionError;

/// How the measurement argument is chosen when tabulating `P(C | x, z)` over states.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementPolicy {
    /// `z := x` at every cell.
    #[default]
    SameAsState,
    /// One fixed measurement location for the whole field.
    Fixed { x: f64, y: f64 },
}

impl MeasurementPolicy {
    pub fn measurement_for(&self, state: Point2) -> Point2 {
        match *self {
            MeasurementPolicy::SameAsState => state,
            MeasurementPolicy::Fixed { x, y } => Point2::new(x, y),
        }
    }
}

/// A raster of constitution probabilities at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutionField {
    pub grid: GridSpec,
    pub policy: MeasurementPolicy,
    /// Row-major values; flagged cells hold NaN.
    pub values: Vec<f64>,
    /// Diagnostic for cells that could not be evaluated.
    pub flags: Vec<Option<String>>,
}

/// Evaluates the constitution at every cell center of `grid`.
///
/// Cells whose environment lookup fails (outside the StaR map, flagged layer
/// cells) are flagged; program-level errors abort.
pub fn precompute_field(
    constitution: &Constitution,
    grid: GridSpec,
    policy: MeasurementPolicy,
) -> Result<ConstitutionField, ConstitutionError> {
    grid.validate().map_err(ConstitutionError::Config)?;
    let cells = par::map_range(grid.len(), |i| {
        let x = grid.center_of(i);
        constitution.probability(x, policy.measurement_for(x))
    });
    let mut values = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for cell in cells {
        match cell {
            Ok(p) => {
                values.push(p);
                flags.push(None);
            }
            Err(e @ (ConstitutionError::OutOfBounds { .. } | ConstitutionError::Map(_))) => {
                values.push(f64::NAN);
                flags.push(Some(e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ConstitutionField { grid, policy, values, flags })
}

impl ConstitutionField {
    /// A field holding one value everywhere.
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, policy: MeasurementPolicy::SameAsState, values: vec![value; grid.len()], flags: vec![None; grid.len()] }
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point2) -> f64 + Sync + Send) -> Self {
        let values = par::map_range(grid.len(), |i| f(grid.center_of(i)));
        Self { grid, policy: MeasurementPolicy::SameAsState, flags: vec![None; grid.len()], values }
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_some()).count()
    }

    /// Bilinear interpolation; `None` outside the bbox or next to a flagged cell.
    pub fn interpolate(&self, p: Point2) -> Option<f64> {
        let s = raster::stencil(&self.grid, p)?;
        if s.active().any(|i| self.flags[i].is_some()) {
            return None;
        }
        Some(s.apply(&self.values).clamp(0.0, 1.0))
    }

    /// Value for the filter: interpolated probability, or 0 where undefined.
    pub fn value_or_zero(&self, p: Point2) -> f64 {
        self.interpolate(p).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String, ConstitutionError> {
        let b = self.grid.bbox;
        let doc = FieldDoc {
            bbox: [b.min_x, b.min_y, b.max_x, b.max_y],
            resolution: [self.grid.rows, self.grid.cols],
            policy: self.policy,
            values: self.values.iter().map(|v| v.is_finite().then_some(*v)).collect(),
            flags: self.flags.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| ConstitutionError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ConstitutionError> {
        let doc: FieldDoc = serde_json::from_str(text).map_err(|e| ConstitutionError::Config(format!("field JSON: {e}")))?;
        let [min_x, min_y, max_x, max_y] = doc.bbox;
        let grid = GridSpec::new(BBox::new(min_x, min_y, max_x, max_y), doc.resolution[0], doc.resolution[1]);
        grid.validate().map_err(ConstitutionError::Config)?;
        if doc.values.len() != grid.len() {
            return Err(ConstitutionError::Config(format!(
                "field has {} values for a {}x{} grid",
                doc.values.len(),
                grid.rows,
                grid.cols
            )));
        }
        let flags = if doc.flags.len() == grid.len() {
            doc.flags
        } else {
            doc.values.iter().map(|v| v.is_none().then(|| "missing".to_string())).collect()
        };
        let values: Vec<f64> = doc.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        if values.iter().zip(&flags).any(|(v, f)| f.is_none() && !(0.0..=1.0).contains(v)) {
            return Err(ConstitutionError::Config("field values must lie in [0, 1]".into()));
        }
        Ok(Self { grid, policy: doc.policy, values, flags })
    }

    /// Grayscale dump: 0 → black, 1 → white, flagged → black.
    pub fn write_pgm<W: Write>(&self, out: W) -> std::io::Result<()> {
        raster::write_pgm(out, &self.grid, &self.values, 0.0, 1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldDoc {
    bbox: [f64; 4],
    resolution: [usize; 2],
    #[serde(default)]
    policy: MeasurementPolicy,
    values: Vec<Option<f64>>,
    #[serde(default)]
    flags: Vec<Option<String>>,
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::constitution::parse;
    use crate::geo_map::{RelationKind, StarMap, StarMapLayer};

    fn starmap() -> Arc<StarMap> {
        let grid = GridSpec::new(BBox::new(0.0, 0.0, 30.0, 30.0), 3, 3);
        let mean: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        Arc::new(StarMap {
            grid,
            sample_count: 2,
            seed: 0,
            layers: vec![StarMapLayer {
                relation: RelationKind::Over,
                tag: "water".into(),
                grid,
                sample_count: 2,
                mean,
                std: vec![0.0; 9],
                flags: vec![None; 9],
            }],
        })
    }

    #[test]
    fn constant_program_gives_ones() {
        let c = Constitution::new(&parse("1.0 :: constitution(X, Z).").unwrap(), starmap()).unwrap();
        let grid = GridSpec::new(BBox::new(0.0, 0.0, 30.0, 30.0), 4, 5);
        let f = precompute_field(&c, grid, MeasurementPolicy::SameAsState).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn cell_centers_match_direct_evaluation() {
        let sm = starmap();
        let c = Constitution::new(&parse("constitution(X, Z) :- over(X, water).").unwrap(), sm).unwrap();
        let grid = GridSpec::new(BBox::new(0.0, 0.0, 30.0, 30.0), 7, 6);
        let f = precompute_field(&c, grid, MeasurementPolicy::SameAsState).unwrap();
        for i in 0..grid.len() {
            let x = grid.center_of(i);
            assert_eq!(f.values[i], c.probability(x, x).unwrap());
            assert_eq!(f.interpolate(x).unwrap(), f.values[i]);
        }
    }

    #[test]
    fn cells_outside_starmap_are_flagged() {
        let c = Constitution::new(&parse("constitution(X, Z) :- over(X, water).").unwrap(), starmap()).unwrap();
        let grid = GridSpec::new(BBox::new(0.0, 0.0, 60.0, 30.0), 2, 2);
        let f = precompute_field(&c, grid, MeasurementPolicy::SameAsState).unwrap();
        assert_eq!(f.flagged_count(), 2);
        assert_eq!(f.value_or_zero(Point2::new(59.0, 1.0)), 0.0);
        let back = ConstitutionField::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.flags, f.flags);
        assert_eq!(back.values[0], f.values[0]);
    }
}
