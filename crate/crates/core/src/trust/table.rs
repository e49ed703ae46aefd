use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::TrustFeatures;
use crate::Error;

/// Calibrated trust ratio per feature bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustTable {
    /// Keys are `type|waterway_bound|anchoring`.
    pub buckets: BTreeMap<String, f64>,
    pub default_tau: f64,
}

impl Default for TrustTable {
    fn default() -> Self {
        Self { buckets: BTreeMap::new(), default_tau: 0.0 }
    }
}

impl TrustTable {
    pub fn new(default_tau: f64) -> Self {
        Self { buckets: BTreeMap::new(), default_tau }
    }

    pub fn insert(&mut self, features: &TrustFeatures, tau: f64) {
        self.buckets.insert(features.to_string(), tau);
    }

    /// Stored τ for the bucket, or the default.
    pub fn lookup(&self, features: &TrustFeatures) -> f64 {
        self.buckets.get(&features.to_string()).copied().unwrap_or(self.default_tau)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let ok = |t: f64| (0.0..=1.0).contains(&t);
        if !ok(self.default_tau) {
            return Err(Error::Config(format!("default tau {} is outside [0, 1]", self.default_tau)));
        }
        for (k, &t) in &self.buckets {
            k.parse::<TrustFeatures>().map_err(Error::Config)?;
            if !ok(t) {
                return Err(Error::Config(format!("tau {t} for bucket {k} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("trust table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trust table serializes")
    }
}
