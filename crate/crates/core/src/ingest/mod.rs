//! AIS track ingestion: CSV parsing, segmentation, resampling and projection
//! into the local tangent frame.

mod ais;
mod projection;
mod track;

use std::path::Path;

use thiserror::Error;

pub use ais::{parse_ais_csv, parse_timestamp, read_ais_csv, AisReadResult, AisRecord, ColumnMap};
pub use projection::{great_circle_m, TangentProjection, EARTH_RADIUS_M};
pub use track::{derive_velocities, resample_track, segment_tracks, Track, TrackSample, VesselMeta, DEFAULT_DT_S, DEFAULT_GAP_S};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("input format error: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Projection centered on the bounding box of `records`.
pub fn projection_for(records: &[AisRecord]) -> Option<TangentProjection> {
    let first = records.first()?;
    let (mut a, mut b, mut c, mut d) = (first.lat, first.lon, first.lat, first.lon);
    for r in records {
        a = a.min(r.lat);
        b = b.min(r.lon);
        c = c.max(r.lat);
        d = d.max(r.lon);
    }
    Some(TangentProjection::centered(a, b, c, d))
}

/// Track file format: a projection plus tracks in its frame.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrackSet {
    pub projection: Option<TangentProjection>,
    pub tracks: Vec<Track>,
}

impl TrackSet {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let set: TrackSet = serde_json::from_str(text).map_err(|e| IngestError::Format(format!("track JSON: {e}")))?;
        for t in &set.tracks {
            t.validate()?;
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tracks serialize")
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
