use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

use super::ais::AisRecord;
use super::projection::TangentProjection;
use super::IngestError;

/// Default gap (s) that splits a vessel's reports into separate tracks.
pub const DEFAULT_GAP_S: f64 = 600.0;
/// Default resampling step (s).
pub const DEFAULT_DT_S: f64 = 60.0;

/// One track sample in the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    pub p: Point2,
    pub v: Point2,
}

/// Static vessel data carried along with a track.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VesselMeta {
    pub vessel_type: Option<u32>,
    pub draft: Option<f64>,
    /// Median reported speed over ground (kn).
    pub median_sog_kn: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub vessel_id: String,
    pub samples: Vec<TrackSample>,
    /// Uniform spacing (s) once resampled.
    pub dt: Option<f64>,
    #[serde(default)]
    pub meta: VesselMeta,
}

impl Track {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.samples.iter().map(|s| s.p).collect()
    }

    /// Checks strictly increasing times and at least two samples.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.samples.len() < 2 {
            return Err(IngestError::Format(format!("track {} has fewer than two samples", self.vessel_id)));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(IngestError::Format(format!("track {} timestamps are not strictly increasing", self.vessel_id)));
        }
        if self.samples.iter().any(|s| !s.t.is_finite() || !s.p.is_finite()) {
            return Err(IngestError::Format(format!("track {} holds non-finite values", self.vessel_id)));
        }
        Ok(())
    }
}

/// Fills `v` by central differences, one-sided at the ends.
pub fn derive_velocities(samples: &mut [TrackSample]) {
    let n = samples.len();
    if n < 2 {
        return;
    }
    for i in 0..n {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let dt = samples[b].t - samples[a].t;
        samples[i].v = (samples[b].p - samples[a].p) * (1.0 / dt);
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn last_some<T: Copy>(it: impl Iterator<Item = Option<T>>) -> Option<T> {
    it.flatten().last()
}

/// Groups records by vessel, sorts by time and splits wherever consecutive
/// reports are more than `gap_s` apart. Tracks with fewer than two reports are
/// discarded. Output is ordered by vessel id, then time.
pub fn segment_tracks(records: &[AisRecord], gap_s: f64, projection: &TangentProjection) -> Vec<Track> {
    let mut by_vessel: BTreeMap<&str, Vec<&AisRecord>> = BTreeMap::new();
    for r in records {
        by_vessel.entry(&r.vessel_id).or_default().push(r);
    }
    let mut tracks = Vec::new();
    for (id, mut recs) in by_vessel {
        recs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        recs.dedup_by(|b, a| a.timestamp == b.timestamp);
        let mut start = 0;
        for i in 1..=recs.len() {
            if i == recs.len() || recs[i].timestamp - recs[i - 1].timestamp > gap_s {
                let part = &recs[start..i];
                if part.len() >= 2 {
                    let mut samples: Vec<TrackSample> = part
                        .iter()
                        .map(|r| TrackSample { t: r.timestamp, p: projection.project(r.lat, r.lon), v: Point2::ZERO })
                        .collect();
                    derive_velocities(&mut samples);
                    tracks.push(Track {
                        vessel_id: id.to_string(),
                        samples,
                        dt: None,
                        meta: VesselMeta {
                            vessel_type: last_some(part.iter().map(|r| r.vessel_type)),
                            draft: last_some(part.iter().map(|r| r.draft)),
                            median_sog_kn: median(part.iter().map(|r| r.sog).collect()),
                        },
                    });
                }
                start = i;
            }
        }
    }
    tracks
}

/// Piecewise-linear resampling on `t0, t0 + dt, …` up to the last timestamp.
pub fn resample_track(track: &Track, dt: f64) -> Result<Track, IngestError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IngestError::Format(format!("resampling step must be positive, got {dt}")));
    }
    track.validate()?;
    let s = &track.samples;
    let (t0, t1) = (s[0].t, s[s.len() - 1].t);
    let n = ((t1 - t0) / dt * (1.0 + 1e-12)).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        while j + 2 < s.len() && s[j + 1].t < t {
            j += 1;
        }
        let (a, b) = (&s[j], &s[j + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let p = if u == 0.0 {
            a.p
        } else if u == 1.0 {
            b.p
        } else {
            a.p + (b.p - a.p) * u
        };
        out.push(TrackSample { t, p, v: Point2::ZERO });
    }
    if out.len() < 2 {
        return Err(IngestError::Format(format!("track {} is shorter than one resampling step", track.vessel_id)));
    }
    derive_velocities(&mut out);
    Ok(Track { vessel_id: track.vessel_id.clone(), samples: out, dt: Some(dt), meta: track.meta.clone() })
}
