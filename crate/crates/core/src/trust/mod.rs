//! Trust features and the calibration of the trust ratio per feature bucket.

mod calibrate;
mod features;
mod table;

pub use calibrate::{
    calibrate, default_tau_grid, normalize_grid, BucketReport, CalibrationReport, CalibrationTrack, HistogramRow,
};
pub use features::{
    extract_features, features_from_meta, vessel_category, TrustFeatures, ANCHORING_SOG_KN, DEFAULT_DRAFT_THRESHOLD_M,
};
pub use table::TrustTable;
