use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{Track, VesselMeta};

/// Draft (m) at or above which a vessel counts as waterway-bound.
pub const DEFAULT_DRAFT_THRESHOLD_M: f64 = 9.0;
/// Median speed over ground (kn) below which a vessel counts as anchoring.
pub const ANCHORING_SOG_KN: f64 = 0.5;

/// Coarse vessel category for an AIS ship-type code.
pub fn vessel_category(code: Option<u32>) -> &'static str {
    match code {
        None | Some(0) => "unknown",
        Some(30) => "fishing",
        Some(31 | 32 | 52) => "towing",
        Some(33) => "dredging",
        Some(35) => "military",
        Some(36) => "sailing",
        Some(37) => "pleasure",
        Some(40..=49) => "high_speed",
        Some(50) => "pilot",
        Some(51) => "search_rescue",
        Some(53) => "port_tender",
        Some(55) => "law_enforcement",
        Some(60..=69) => "passenger",
        Some(70..=79) => "cargo",
        Some(80..=89) => "tanker",
        Some(_) => "other",
    }
}

/// The trust bucket of a track.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrustFeatures {
    pub vessel_type: String,
    pub waterway_bound: bool,
    pub anchoring: bool,
}

impl TrustFeatures {
    pub fn new(vessel_type: impl Into<String>, waterway_bound: bool, anchoring: bool) -> Self {
        Self { vessel_type: vessel_type.into(), waterway_bound, anchoring }
    }
}

impl fmt::Display for TrustFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.vessel_type, self.waterway_bound, self.anchoring)
    }
}

impl FromStr for TrustFeatures {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('|').collect();
        let flag = |p: &str| p.parse::<bool>().map_err(|_| format!("bad flag '{p}' in bucket '{s}'"));
        match parts.as_slice() {
            [t, w, a] if !t.is_empty() => Ok(Self::new(*t, flag(w)?, flag(a)?)),
            _ => Err(format!("bucket '{s}' is not of the form type|waterway_bound|anchoring")),
        }
    }
}

/// Features from vessel metadata with the given draft threshold.
pub fn features_from_meta(meta: &VesselMeta, draft_threshold_m: f64) -> TrustFeatures {
    let vessel_type = vessel_category(meta.vessel_type);
    let waterway_bound = meta.draft.is_some_and(|d| d >= draft_threshold_m) || matches!(vessel_type, "cargo" | "tanker");
    let anchoring = meta.median_sog_kn.is_some_and(|s| s < ANCHORING_SOG_KN);
    TrustFeatures::new(vessel_type, waterway_bound, anchoring)
}

/// Features of a track, using the default draft threshold.
pub fn extract_features(track: &Track) -> TrustFeatures {
    features_from_meta(&track.meta, DEFAULT_DRAFT_THRESHOLD_M)
}
