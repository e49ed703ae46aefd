use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evalbench::mae;
use crate::filter::{run_filter, ConstitutionEvaluator, FilterConfig, FilterError, Measurement};
use crate::geometry::Point2;
use crate::{par, seed, Error};

use super::features::TrustFeatures;
use super::table::TrustTable;

/// `{0, 0.1, …, 1}`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// A recorded track prepared for calibration: reference positions and the
/// measurements the filter sees.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTrack {
    pub id: String,
    pub features: TrustFeatures,
    pub truth: Vec<Point2>,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket: String,
    pub tau_grid: Vec<f64>,
    /// Bucket-mean MAE for each τ of the grid.
    pub mae: Vec<f64>,
    pub chosen_tau: f64,
    pub track_count: usize,
    /// Tracks dropped because a filter run failed.
    pub skipped: Vec<String>,
    /// Optimal τ of each member track (ties to the smallest τ).
    pub per_track_tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub tau: f64,
    /// Buckets choosing this τ, weighted by their track counts.
    pub buckets_weighted: usize,
    /// Tracks whose individual optimum is this τ.
    pub tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub buckets: Vec<BucketReport>,
    pub histogram: Vec<HistogramRow>,
}

impl CalibrationReport {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("tau,buckets_weighted,tracks\n");
        for r in &self.histogram {
            let _ = writeln!(s, "{},{},{}", r.tau, r.buckets_weighted, r.tracks);
        }
        s
    }
}

/// Index of the smallest value; ties go to the earliest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Validates and sorts a τ grid; it must lie in `[0, 1]` and contain 0.
pub fn normalize_grid(grid: &[f64]) -> Result<Vec<f64>, Error> {
    let mut g = grid.to_vec();
    if g.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("tau grid values must lie in [0, 1]".into()));
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    if g.first() != Some(&0.0) {
        return Err(Error::Config("tau grid must contain 0".into()));
    }
    Ok(g)
}

/// Grid search of τ per trust bucket.
///
/// Every track is filtered once per τ with a seed that depends only on the
/// track index, so all arms of a track see the same random streams. The
/// chosen τ minimizes the bucket-mean MAE, with ties going to the smaller τ.
pub fn calibrate(
    tracks: &[CalibrationTrack],
    config: &FilterConfig,
    evaluator: &dyn ConstitutionEvaluator,
    tau_grid: &[f64],
    master_seed: u64,
) -> Result<(TrustTable, CalibrationReport), Error> {
    if tracks.is_empty() {
        return Err(Error::Config("calibration needs at least one track".into()));
    }
    let grid = normalize_grid(tau_grid)?;
    let jobs: Vec<(usize, f64)> = (0..tracks.len()).flat_map(|i| grid.iter().map(move |&t| (i, t))).collect();
    let results: Vec<Result<f64, FilterError>> = par::map_slice(&jobs, |&(i, tau)| {
        let tr = &tracks[i];
        let run = run_filter(config, &tr.measurements, Some(evaluator), tau, seed::derive(master_seed, "calibrate", i as u64))?;
        Ok(mae(&run.positions(), &tr.truth))
    });

    let mut by_bucket: BTreeMap<&TrustFeatures, Vec<usize>> = BTreeMap::new();
    for (i, t) in tracks.iter().enumerate() {
        by_bucket.entry(&t.features).or_default().push(i);
    }
    let mut table = TrustTable::new(0.0);
    let mut buckets = Vec::new();
    for (features, members) in by_bucket {
        let mut sums = vec![0.0; grid.len()];
        let mut used = 0usize;
        let mut skipped = Vec::new();
        let mut per_track_tau = Vec::new();
        for &i in &members {
            let row: Result<Vec<f64>, &FilterError> = (0..grid.len()).map(|k| results[i * grid.len() + k].as_ref().copied()).collect();
            match row {
                Ok(maes) => {
                    for (s, m) in sums.iter_mut().zip(&maes) {
                        *s += m;
                    }
                    per_track_tau.push(grid[argmin(&maes)]);
                    used += 1;
                }
                Err(e) => {
                    log::warn!("calibration: skipping track {} ({e})", tracks[i].id);
                    skipped.push(tracks[i].id.clone());
                }
            }
        }
        let (chosen_tau, mae) = if used == 0 {
            (table.default_tau, vec![f64::NAN; grid.len()])
        } else {
            let means: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
            (grid[argmin(&means)], means)
        };
        if used > 0 {
            table.insert(features, chosen_tau);
        }
        buckets.push(BucketReport {
            bucket: features.to_string(),
            tau_grid: grid.clone(),
            mae,
            chosen_tau,
            track_count: used,
            skipped,
            per_track_tau,
        });
    }
    let histogram = grid
        .iter()
        .map(|&tau| HistogramRow {
            tau,
            buckets_weighted: buckets.iter().filter(|b| b.track_count > 0 && b.chosen_tau == tau).map(|b| b.track_count).sum(),
            tracks: buckets.iter().flat_map(|b| &b.per_track_tau).filter(|&&t| t == tau).count(),
        })
        .collect();
    Ok((table, CalibrationReport { buckets, histogram }))
}
