use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{point_segment_distance, Point2};

use super::{MapError, VectorMap};

/// Spatial relations between a query point and the features carrying a tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    /// 1 inside (or on the boundary of) a closed polygon with the tag, else 0.
    Over,
    /// Euclidean distance in meters to the nearest tagged vertex or segment.
    Distance,
    /// Inverse-distance-weighted depth from the nearest tagged soundings.
    Depth,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [RelationKind::Over, RelationKind::Distance, RelationKind::Depth];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Over => "over",
            RelationKind::Distance => "distance",
            RelationKind::Depth => "depth",
        }
    }

    /// Whether the relation is a 0/1 indicator (consumed as a Bernoulli parameter).
    pub fn is_indicator(self) -> bool {
        self == RelationKind::Over
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationKind {
    type Err = MapError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| MapError::Config(format!("unknown relation '{s}'")))
    }
}

/// Result of evaluating a relation on one map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelationValue {
    Value(f64),
    /// No feature carries the tag; reported instead of an infinite distance.
    NoFeature,
}

impl RelationValue {
    /// The value, with [`RelationValue::NoFeature`] mapped to `+inf`.
    pub fn as_f64(self) -> f64 {
        match self {
            RelationValue::Value(v) => v,
            RelationValue::NoFeature => f64::INFINITY,
        }
    }
}

/// Neighbour count for depth interpolation.
pub const DEPTH_NEIGHBOURS: usize = 4;
const COINCIDENT: f64 = 1e-9;

/// Evaluates `rel` between `point` and the features of `map` tagged `tag`.
///
/// `Over` of an absent tag is 0; `Distance` of an absent tag is
/// [`RelationValue::NoFeature`]; `Depth` without tagged soundings is a domain error.
pub fn eval_relation(map: &VectorMap, rel: RelationKind, point: Point2, tag: &str) -> Result<RelationValue, MapError> {
    match rel {
        RelationKind::Over => Ok(RelationValue::Value(if over(map, point, tag) { 1.0 } else { 0.0 })),
        RelationKind::Distance => Ok(distance(map, point, tag)),
        RelationKind::Depth => depth(map, point, tag).map(RelationValue::Value),
    }
}

fn over(map: &VectorMap, p: Point2, tag: &str) -> bool {
    let Some(idx) = map.tag_index(tag) else { return false };
    let verts = map.vertices();
    let rings = &map.topology().rings;
    idx.rings_by_feature.iter().any(|ring_ids| {
        let mut inside = false;
        for &r in ring_ids {
            let ring = &rings[r].vertices;
            let n = ring.len();
            for i in 0..n {
                let a = verts[ring[i]];
                let b = verts[ring[(i + 1) % n]];
                if point_segment_distance(p, a, b) <= COINCIDENT {
                    return true;
                }
                if (a.y > p.y) != (b.y > p.y) {
                    let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if p.x < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    })
}

fn distance(map: &VectorMap, p: Point2, tag: &str) -> RelationValue {
    let Some(idx) = map.tag_index(tag) else { return RelationValue::NoFeature };
    if over(map, p, tag) {
        return RelationValue::Value(0.0);
    }
    let verts = map.vertices();
    let edges = map.edges();
    let seg = idx
        .edges
        .iter()
        .map(|&e| point_segment_distance(p, verts[edges[e].0], verts[edges[e].1]));
    let pts = idx.isolated.iter().map(|&v| p.distance(verts[v]));
    let d = seg.chain(pts).fold(f64::INFINITY, f64::min);
    if d.is_finite() {
        RelationValue::Value(d)
    } else {
        RelationValue::NoFeature
    }
}

fn depth(map: &VectorMap, p: Point2, tag: &str) -> Result<f64, MapError> {
    let soundings = map.tag_index(tag).map(|i| i.soundings.as_slice()).unwrap_or(&[]);
    if soundings.is_empty() {
        return Err(MapError::Domain(format!("no depth soundings carry tag '{tag}'")));
    }
    let verts = map.vertices();
    // k smallest by insertion into a short sorted buffer
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(DEPTH_NEIGHBOURS + 1);
    for &v in soundings {
        let d = p.distance(verts[v]);
        if d <= COINCIDENT {
            return Ok(map.depth(v).expect("sounding without depth"));
        }
        let pos = nearest.partition_point(|&(dd, vv)| (dd, vv) < (d, v));
        if pos < DEPTH_NEIGHBOURS {
            nearest.insert(pos, (d, v));
            nearest.truncate(DEPTH_NEIGHBOURS);
        }
    }
    let (num, den) = nearest.iter().fold((0.0, 0.0), |(num, den), &(d, v)| {
        let w = 1.0 / (d * d);
        (num + w * map.depth(v).unwrap(), den + w)
    });
    Ok(num / den)
}
