//! Tracking of rule-compliant agents.
//!
//! The crate is organised around four layers:
//!
//! - [`geo_map`]: tagged vector maps with per-feature uncertainty and the
//!   raster layers of spatial-relation moments computed from them.
//! - [`constitution`]: a small probabilistic logic language whose query
//!   probability is computed by weighted model counting over a grounded program.
//! - [`filter`]: a particle filter whose belief update multiplies in the
//!   probability that the rules hold, blended with a uniform density by a trust ratio.
//! - [`trust`], [`ingest`] and [`evalbench`]: trust calibration, AIS track
//!   preprocessing and the synthetic ablation harness.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise.

pub mod constitution;
pub mod evalbench;
pub mod filter;
pub mod geo_map;
pub mod geometry;
pub mod ingest;
pub mod par;
pub mod raster;
pub mod seed;
pub mod trust;

mod error;

pub use error::{Error, Result};
pub use geometry::{BBox, GridSpec, Point2};
