use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitution::{parse, precompute_field, Constitution, ConstitutionField, MeasurementPolicy, Program};
use crate::filter::{ConstitutionEvaluator, ConstitutionMode, FilterConfig, Measurement, State};
use crate::geo_map::{build_starmap, FeaturePerturbation, MapBuilder, PerturbationSet, RelationKind, StarMap, VectorMap};
use crate::geometry::{BBox, GridSpec, Point2};
use crate::ingest::TrackSample;
use crate::seed;
use crate::Error;

use super::simulate::{measure, simulate_agent, ComplianceMode, Dynamics};
use super::BenchError;

/// Constitution used when the scenario does not supply one.
pub const CORRIDOR_CONSTITUTION: &str = "% Vessels keep to the fairway.\nconstitution(X, Z) :- over(X, water).\n";

/// A water corridor around a polyline centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorSpec {
    pub centerline: Vec<[f64; 2]>,
    pub half_width_m: f64,
    /// Land margin around the corridor inside the map bounds.
    pub margin_m: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self { centerline: vec![[0.0, 0.0], [10_000.0, 0.0]], half_width_m: 40.0, margin_m: 1_000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSpec {
    pub steps: usize,
    pub dt: f64,
    pub speed: f64,
    pub sigma_a: f64,
    /// Relaxation rate of the velocity toward the cruise velocity (1/s).
    pub damping: f64,
    /// Lateral start offset of incompliant agents beyond the corridor edge (m).
    pub incompliant_offset_m: f64,
    /// Redraws allowed when an agent gets stuck.
    pub max_attempts: usize,
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self { steps: 100, dt: 10.0, speed: 5.0, sigma_a: 0.01, damping: 0.05, incompliant_offset_m: 50.0, max_attempts: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarMapSpec {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    /// Translation noise of the corridor feature (m).
    pub translation_std_m: f64,
}

impl Default for StarMapSpec {
    fn default() -> Self {
        Self { rows: 100, cols: 100, samples: 100, translation_std_m: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSpec {
    pub tracks: usize,
    pub tau_grid: Vec<f64>,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self { tracks: 20, tau_grid: crate::trust::default_tau_grid() }
    }
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub mode: ComplianceMode,
    pub corridor: CorridorSpec,
    pub starmap: StarMapSpec,
    pub agent: AgentSpec,
    /// Constitution text; the corridor rule when absent.
    pub constitution: Option<String>,
    pub filter: FilterConfig,
    pub seeds: usize,
    /// Fixed trust ratios to evaluate besides the baseline.
    pub taus: Vec<f64>,
    /// Calibrate τ on separate agents before the ablation.
    pub calibration: Option<CalibrationSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: ComplianceMode::Compliant,
            corridor: CorridorSpec::default(),
            starmap: StarMapSpec::default(),
            agent: AgentSpec::default(),
            constitution: None,
            filter: FilterConfig { dt: 10.0, ..FilterConfig::default() },
            seeds: 20,
            taus: vec![1.0],
            calibration: Some(CalibrationSpec::default()),
        }
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let c = &self.corridor;
        if c.centerline.len() < 2 || !(c.half_width_m > 0.0) || !(c.margin_m >= 0.0) {
            return Err(Error::Config("corridor needs two centerline points and a positive half width".into()));
        }
        if self.agent.steps == 0 || !(self.agent.dt > 0.0) || self.agent.max_attempts == 0 {
            return Err(Error::Config("agent steps, dt and max_attempts must be positive".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("taus must lie in [0, 1]".into()));
        }
        if let Some(cal) = &self.calibration {
            if cal.tracks == 0 {
                return Err(Error::Config("calibration needs at least one track".into()));
            }
            crate::trust::normalize_grid(&cal.tau_grid)?;
        }
        self.filter.validate()?;
        Ok(())
    }
}

/// Left and right offsets of a polyline with mitered joins.
pub fn corridor_polygon(centerline: &[Point2], half_width: f64) -> Vec<Point2> {
    let n = centerline.len();
    let normal = |a: Point2, b: Point2| {
        let d = b - a;
        let l = d.norm();
        Point2::new(-d.y / l, d.x / l)
    };
    let offsets: Vec<Point2> = (0..n)
        .map(|i| {
            if i == 0 {
                normal(centerline[0], centerline[1]) * half_width
            } else if i == n - 1 {
                normal(centerline[n - 2], centerline[n - 1]) * half_width
            } else {
                let (n0, n1) = (normal(centerline[i - 1], centerline[i]), normal(centerline[i], centerline[i + 1]));
                let m = n0 + n1;
                let m = m * (1.0 / m.norm());
                m * (half_width / m.dot(n0))
            }
        })
        .collect();
    let mut ring: Vec<Point2> = centerline.iter().zip(&offsets).map(|(&c, &o)| c + o).collect();
    ring.extend(centerline.iter().zip(&offsets).rev().map(|(&c, &o)| c + -o));
    ring
}

/// Everything derived from a scenario spec: map, StaR map, constitution and field.
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub centerline: Vec<Point2>,
    pub map: VectorMap,
    pub starmap: Arc<StarMap>,
    pub program: Program,
    pub constitution: Constitution,
    pub field: ConstitutionField,
}

impl Scenario {
    pub fn build(spec: &ScenarioSpec) -> Result<Self, Error> {
        spec.validate()?;
        let c = &spec.corridor;
        let centerline: Vec<Point2> = c.centerline.iter().map(|&[x, y]| Point2::new(x, y)).collect();
        let ring = corridor_polygon(&centerline, c.half_width_m);
        let mut b = MapBuilder::new();
        b.add_polygon(&[ring.clone()], &["water"]);
        let map = b.build()?;
        let ext = map.bounds().ok_or_else(|| Error::Internal("empty corridor map".into()))?;
        let m = c.margin_m;
        let bbox = BBox::new(ext.min_x - m, ext.min_y - m, ext.max_x + m, ext.max_y + m);
        let grid = GridSpec::new(bbox, spec.starmap.rows, spec.starmap.cols);
        let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(spec.starmap.translation_std_m))?;
        let starmap = Arc::new(build_starmap(
            &map,
            &perturb,
            &[(RelationKind::Over, "water".to_string()), (RelationKind::Distance, "water".to_string())],
            grid,
            spec.starmap.samples,
            seed::derive(spec.seed, "starmap", 0),
        )?);
        let program = parse(spec.constitution.as_deref().unwrap_or(CORRIDOR_CONSTITUTION))?;
        let constitution = Constitution::new(&program, starmap.clone())?;
        let field = precompute_field(&constitution, grid, MeasurementPolicy::SameAsState)?;
        Ok(Self { spec: spec.clone(), centerline, map, starmap, program, constitution, field })
    }

    /// The evaluator matching the filter's constitution mode.
    pub fn evaluator(&self) -> &dyn ConstitutionEvaluator {
        match self.spec.filter.mode {
            ConstitutionMode::Direct => &self.constitution,
            ConstitutionMode::Field => &self.field,
        }
    }

    fn start_state(&self, compliant: bool) -> State {
        let (a, b) = (self.centerline[0], self.centerline[1]);
        let d = (b - a) * (1.0 / (b - a).norm());
        let v = d * self.spec.agent.speed;
        if compliant {
            State::new(a, v)
        } else {
            let side = Point2::new(-d.y, d.x);
            State::new(a + side * (self.spec.corridor.half_width_m + self.spec.agent.incompliant_offset_m), v)
        }
    }

    /// Whether the agent of stream `(label, index)` is compliant.
    pub fn is_compliant(&self, label: &str, index: u64) -> bool {
        match self.spec.mode {
            ComplianceMode::Compliant => true,
            ComplianceMode::Incompliant => false,
            ComplianceMode::Mixed => seed::derive(self.spec.seed, &format!("{label}-mode"), index) % 2 == 0,
        }
    }

    /// Ground truth for agent `(label, index)`; stuck agents are redrawn.
    pub fn ground_truth(&self, label: &str, index: u64) -> Result<Vec<TrackSample>, BenchError> {
        let compliant = self.is_compliant(label, index);
        let mode = if compliant { ComplianceMode::Compliant } else { ComplianceMode::Incompliant };
        let a = &self.spec.agent;
        let mut last = BenchError::Stuck { step: 0 };
        for attempt in 0..a.max_attempts as u64 {
            let mut rng = seed::rng(seed::derive(seed::derive(self.spec.seed, label, index), "truth", attempt));
            match simulate_agent(&self.field, self.start_state(compliant), a.steps, Dynamics { dt: a.dt, sigma_a: a.sigma_a, damping: a.damping }, mode, &mut rng) {
                Ok(t) => return Ok(t),
                Err(e @ BenchError::Stuck { .. }) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Ground truth and its noisy measurements for agent `(label, index)`.
    pub fn agent(&self, label: &str, index: u64) -> Result<(Vec<TrackSample>, Vec<Measurement>), Error> {
        let truth = self.ground_truth(label, index)?;
        let meas = self.spec.filter.measurement_model()?;
        let mut rng = seed::rng(seed::derive(seed::derive(self.spec.seed, label, index), "measurements", 0));
        let z = measure(&truth, &meas, &mut rng);
        Ok((truth, z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_corridor_polygon() {
        let ring = corridor_polygon(&[Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], 2.0);
        assert_eq!(ring, vec![Point2::new(0.0, 2.0), Point2::new(10.0, 2.0), Point2::new(10.0, -2.0), Point2::new(0.0, -2.0)]);
    }

    #[test]
    fn mitered_bend_keeps_width() {
        let c = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)];
        let ring = corridor_polygon(&c, 1.0);
        assert!((ring[1] - Point2::new(9.0, 1.0)).norm() < 1e-12);
        assert!((ring[4] - Point2::new(11.0, -1.0)).norm() < 1e-12);
    }
}
