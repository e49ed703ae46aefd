use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::geometry::{BBox, Point2};

use super::MapError;

/// A closed edge cycle, listed as vertex indices without repeating the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub feature: usize,
    pub vertices: Vec<usize>,
}

/// Per-tag lookup tables used by the relation evaluators.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct TagIndex {
    pub features: Vec<usize>,
    /// Rings grouped by feature so that holes can be handled with even-odd parity.
    pub rings_by_feature: Vec<Vec<usize>>,
    pub edges: Vec<usize>,
    pub isolated: Vec<usize>,
    pub soundings: Vec<usize>,
}

/// Everything about a map that perturbation leaves unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub edges: Vec<(usize, usize)>,
    /// Non-geometric connections tying polygon holes to their exterior ring.
    pub links: Vec<(usize, usize)>,
    pub feature_of_vertex: Vec<usize>,
    pub tags_of_feature: Vec<BTreeSet<String>>,
    pub depth: Vec<Option<f64>>,
    pub rings: Vec<Ring>,
    pub(crate) by_tag: BTreeMap<String, TagIndex>,
}

/// A tagged vector map: vertices, edges, and a tag set per connected feature.
///
/// Vertex positions are stored separately from the [`Topology`] so that map
/// variants share the topology and differ only in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMap {
    vertices: Vec<Point2>,
    topology: Arc<Topology>,
}

impl VectorMap {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.topology.edges
    }

    pub fn feature_count(&self) -> usize {
        self.topology.tags_of_feature.len()
    }

    pub fn feature_of_vertex(&self, v: usize) -> usize {
        self.topology.feature_of_vertex[v]
    }

    pub fn tags_of_feature(&self, f: usize) -> &BTreeSet<String> {
        &self.topology.tags_of_feature[f]
    }

    pub fn depth(&self, v: usize) -> Option<f64> {
        self.topology.depth[v]
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.topology.by_tag.contains_key(tag)
    }

    /// All tags carried by any feature, sorted.
    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.topology.by_tag.keys().map(String::as_str)
    }

    /// Whether some vertex of a feature with `tag` carries a depth sounding.
    pub fn has_soundings(&self, tag: &str) -> bool {
        self.tag_index(tag).is_some_and(|i| !i.soundings.is_empty())
    }

    pub(crate) fn tag_index(&self, tag: &str) -> Option<&TagIndex> {
        self.topology.by_tag.get(tag)
    }

    /// Same topology with new vertex coordinates.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point2>) -> VectorMap {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        VectorMap { vertices, topology: Arc::clone(&self.topology) }
    }

    /// Bounding box of all vertices, or `None` for an empty map.
    pub fn bounds(&self) -> Option<BBox> {
        let first = self.vertices.first()?;
        let mut b = BBox::new(first.x, first.y, first.x, first.y);
        for v in &self.vertices {
            b.min_x = b.min_x.min(v.x);
            b.min_y = b.min_y.min(v.y);
            b.max_x = b.max_x.max(v.x);
            b.max_y = b.max_y.max(v.y);
        }
        Some(b)
    }
}

/// Labels connected components of the graph `(n, edges)` with ids assigned
/// in order of each component's smallest vertex.
pub fn connected_components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[v] = label[r];
    }
    out
}

/// Incrementally assembles a [`VectorMap`] from points, polylines and polygons.
#[derive(Debug, Default)]
pub struct MapBuilder {
    vertices: Vec<Point2>,
    vertex_tags: Vec<BTreeSet<String>>,
    depth: Vec<Option<f64>>,
    edges: Vec<(usize, usize)>,
    /// Joins holes to their exterior ring for component labelling only.
    links: Vec<(usize, usize)>,
    rings: Vec<Vec<usize>>,
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_vertex(&mut self, p: Point2, tags: &BTreeSet<String>, depth: Option<f64>) -> usize {
        self.vertices.push(p);
        self.vertex_tags.push(tags.clone());
        self.depth.push(depth);
        self.vertices.len() - 1
    }

    /// Adds an isolated vertex, optionally carrying a depth sounding.
    pub fn add_point<S: AsRef<str>>(&mut self, p: Point2, tags: &[S], depth: Option<f64>) -> &mut Self {
        let tags = to_set(tags);
        self.push_vertex(p, &tags, depth);
        self
    }

    /// Adds an open polyline; it contributes to distance but never to `over`.
    pub fn add_polyline<S: AsRef<str>>(&mut self, points: &[Point2], tags: &[S]) -> &mut Self {
        let tags = to_set(tags);
        let ids: Vec<usize> = points.iter().map(|&p| self.push_vertex(p, &tags, None)).collect();
        self.edges.extend(ids.windows(2).map(|w| (w[0], w[1])));
        self
    }

    /// Adds a polygon given as an exterior ring followed by optional holes.
    /// A repeated closing vertex is dropped.
    pub fn add_polygon<S: AsRef<str>>(&mut self, rings: &[Vec<Point2>], tags: &[S]) -> &mut Self {
        let tags = to_set(tags);
        let mut first_of_polygon = None;
        for ring in rings {
            let mut pts: &[Point2] = ring;
            if pts.len() > 1 && pts.first() == pts.last() {
                pts = &pts[..pts.len() - 1];
            }
            if pts.is_empty() {
                continue;
            }
            let ids: Vec<usize> = pts.iter().map(|&p| self.push_vertex(p, &tags, None)).collect();
            if ids.len() >= 2 {
                self.edges.extend(ids.windows(2).map(|w| (w[0], w[1])));
                if ids.len() >= 3 {
                    self.edges.push((ids[ids.len() - 1], ids[0]));
                    self.rings.push(ids.clone());
                }
            }
            match first_of_polygon {
                None => first_of_polygon = Some(ids[0]),
                Some(f) => self.links.push((f, ids[0])),
            }
        }
        self
    }

    pub fn build(self) -> Result<VectorMap, MapError> {
        let n = self.vertices.len();
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(MapError::Invalid(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
        }
        if let Some(i) = self.vertices.iter().position(|p| !p.is_finite()) {
            return Err(MapError::Invalid(format!("vertex {i} has non-finite coordinates")));
        }
        let all: Vec<(usize, usize)> = self.edges.iter().chain(self.links.iter()).copied().collect();
        let feature_of_vertex = connected_components(n, &all);
        let n_features = feature_of_vertex.iter().map(|f| f + 1).max().unwrap_or(0);
        let mut tags_of_feature = vec![BTreeSet::new(); n_features];
        for (v, tags) in self.vertex_tags.iter().enumerate() {
            tags_of_feature[feature_of_vertex[v]].extend(tags.iter().cloned());
        }
        if let Some(f) = tags_of_feature.iter().position(|t| t.is_empty()) {
            return Err(MapError::Invalid(format!("feature {f} has an empty tag set")));
        }

        let geometric = self.edges;

        let rings: Vec<Ring> = self
            .rings
            .iter()
            .map(|r| Ring { feature: feature_of_vertex[r[0]], vertices: r.clone() })
            .collect();

        let mut degree = vec![0usize; n];
        for &(a, b) in &geometric {
            degree[a] += 1;
            degree[b] += 1;
        }

        let mut by_tag: BTreeMap<String, TagIndex> = BTreeMap::new();
        for (f, tags) in tags_of_feature.iter().enumerate() {
            for t in tags {
                by_tag.entry(t.clone()).or_default().features.push(f);
            }
        }
        for idx in by_tag.values_mut() {
            let features: BTreeSet<usize> = idx.features.iter().copied().collect();
            for &f in &idx.features {
                let ids: Vec<usize> = rings.iter().enumerate().filter(|(_, r)| r.feature == f).map(|(i, _)| i).collect();
                if !ids.is_empty() {
                    idx.rings_by_feature.push(ids);
                }
            }
            idx.edges = geometric
                .iter()
                .enumerate()
                .filter(|(_, (a, _))| features.contains(&feature_of_vertex[*a]))
                .map(|(i, _)| i)
                .collect();
            for v in 0..n {
                if !features.contains(&feature_of_vertex[v]) {
                    continue;
                }
                if degree[v] == 0 {
                    idx.isolated.push(v);
                }
                if self.depth[v].is_some() {
                    idx.soundings.push(v);
                }
            }
        }

        Ok(VectorMap {
            vertices: self.vertices,
            topology: Arc::new(Topology {
                edges: geometric,
                links: self.links,
                feature_of_vertex,
                tags_of_feature,
                depth: self.depth,
                rings,
                by_tag,
            }),
        })
    }
}

fn to_set<S: AsRef<str>>(tags: &[S]) -> BTreeSet<String> {
    tags.iter().map(|t| t.as_ref().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
            Point2::new(x0, y0),
        ]
    }

    #[test]
    fn features_follow_components() {
        let mut b = MapBuilder::new();
        b.add_polygon(&[square(0.0, 0.0, 10.0)], &["land"]);
        b.add_polyline(&[Point2::new(20.0, 0.0), Point2::new(30.0, 0.0)], &["road"]);
        b.add_point(Point2::new(5.0, 50.0), &["water"], Some(12.0));
        let m = b.build().unwrap();
        assert_eq!(m.vertices().len(), 4 + 2 + 1);
        assert_eq!(m.feature_count(), 3);
        assert_eq!(m.edges().len(), 4 + 1);
        assert_eq!(m.topology().rings.len(), 1);
        assert!(m.has_tag("land") && m.has_tag("road") && m.has_tag("water"));
        assert_eq!(m.tag_index("water").unwrap().soundings, vec![6]);
        assert_eq!(m.tag_index("water").unwrap().isolated, vec![6]);
        for &(a, b) in m.edges() {
            assert_eq!(m.feature_of_vertex(a), m.feature_of_vertex(b));
        }
    }

    #[test]
    fn holes_share_the_feature_but_not_an_edge() {
        let mut b = MapBuilder::new();
        b.add_polygon(&[square(0.0, 0.0, 10.0), square(4.0, 4.0, 2.0)], &["land"]);
        let m = b.build().unwrap();
        assert_eq!(m.feature_count(), 1);
        assert_eq!(m.edges().len(), 8);
        assert_eq!(m.topology().rings.len(), 2);
        assert_eq!(m.tag_index("land").unwrap().rings_by_feature, vec![vec![0, 1]]);
    }

    #[test]
    fn components_are_labelled_in_vertex_order() {
        assert_eq!(connected_components(5, &[(3, 4), (0, 2)]), vec![0, 1, 0, 2, 2]);
    }
}
