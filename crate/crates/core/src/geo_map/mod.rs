//! Tagged vector maps with per-feature uncertainty, and the raster layers of
//! spatial-relation moments ("StaR maps") estimated from perturbed map variants.

mod geojson;
mod map;
mod perturb;
mod relation;
mod starmap;

use thiserror::Error;

pub use geojson::{load_geojson, Coordinates, LoadedMap};
pub use map::{connected_components, MapBuilder, Ring, Topology, VectorMap};
pub use perturb::{
    sample_map_variant, sample_variant, FeaturePerturbation, LinearMapDist, PerturbationConfig, PerturbationSet,
    PerturbationSpec,
};
pub use relation::{eval_relation, RelationKind, RelationValue, DEPTH_NEIGHBOURS};
pub use starmap::{
    build_starmap, estimate_moments, interpolate, sample_moments, CellError, Moments, StarMap, StarMapLayer,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("map parse error: {0}")]
    Parse(String),
    #[error("map configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("relation domain error: {0}")]
    Domain(String),
    #[error("no feature carries tag '{0}'")]
    NoFeature(String),
    #[error("point ({x}, {y}) lies outside the layer bounds")]
    OutOfBounds { x: f64, y: f64 },
}
