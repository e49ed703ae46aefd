use serde_json::Value;

use crate::geometry::Point2;
use crate::ingest::TangentProjection;

use super::{MapBuilder, MapError, VectorMap};

/// How GeoJSON coordinates are interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coordinates {
    /// `[lon, lat]` degrees, projected about `origin` or, when `None`, about
    /// the center of the coordinates' bounding box.
    LonLat { origin: Option<TangentProjection> },
    /// Coordinates already in meters of the local frame.
    Meters,
}

/// A map loaded from GeoJSON together with the projection used, if any.
#[derive(Debug, Clone)]
pub struct LoadedMap {
    pub map: VectorMap,
    pub projection: Option<TangentProjection>,
}

/// Parses a GeoJSON FeatureCollection into a [`VectorMap`].
///
/// Every feature must carry `properties.tags` as a nonempty array of strings.
/// Point features may carry a numeric `properties.depth` in meters.
/// LineStrings become open polylines and Polygon rings become closed cycles;
/// the Multi* variants are expanded.
pub fn load_geojson(text: &str, coords: Coordinates) -> Result<LoadedMap, MapError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| MapError::Parse(format!("GeoJSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(MapError::Parse("GeoJSON root must be a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| MapError::Parse("FeatureCollection without a features array".into()))?;

    let mut parsed = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        parsed.push(parse_feature(f).map_err(|e| MapError::Parse(format!("feature {i}: {e}")))?);
    }

    let projection = match coords {
        Coordinates::Meters => None,
        Coordinates::LonLat { origin: Some(p) } => Some(p),
        Coordinates::LonLat { origin: None } => {
            let all = parsed.iter().flat_map(|f| f.geometry.points());
            let (mut lo_lon, mut lo_lat, mut hi_lon, mut hi_lat) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for [lon, lat] in all {
                lo_lon = lo_lon.min(lon);
                hi_lon = hi_lon.max(lon);
                lo_lat = lo_lat.min(lat);
                hi_lat = hi_lat.max(lat);
            }
            if !lo_lon.is_finite() {
                return Err(MapError::Parse("GeoJSON contains no coordinates".into()));
            }
            Some(TangentProjection::new(0.5 * (lo_lat + hi_lat), 0.5 * (lo_lon + hi_lon)))
        }
    };
    let to_xy = |[a, b]: [f64; 2]| -> Result<Point2, MapError> {
        match projection {
            None => Ok(Point2::new(a, b)),
            Some(p) => {
                if !(-180.0..=180.0).contains(&a) || !(-90.0..=90.0).contains(&b) {
                    return Err(MapError::Parse(format!("coordinate [{a}, {b}] is not a valid lon/lat pair")));
                }
                Ok(p.project(b, a))
            }
        }
    };

    let mut builder = MapBuilder::new();
    for f in parsed {
        let tags = &f.tags;
        match f.geometry {
            Geometry::Points(pts) => {
                for p in pts {
                    builder.add_point(to_xy(p)?, tags, f.depth);
                }
            }
            Geometry::Lines(lines) => {
                for line in lines {
                    let pts = line.into_iter().map(to_xy).collect::<Result<Vec<_>, _>>()?;
                    builder.add_polyline(&pts, tags);
                }
            }
            Geometry::Polygons(polys) => {
                for poly in polys {
                    let rings = poly
                        .into_iter()
                        .map(|r| r.into_iter().map(to_xy).collect::<Result<Vec<_>, _>>())
                        .collect::<Result<Vec<_>, _>>()?;
                    builder.add_polygon(&rings, tags);
                }
            }
        }
    }
    Ok(LoadedMap { map: builder.build()?, projection })
}

struct Feature {
    tags: Vec<String>,
    depth: Option<f64>,
    geometry: Geometry,
}

enum Geometry {
    Points(Vec<[f64; 2]>),
    Lines(Vec<Vec<[f64; 2]>>),
    Polygons(Vec<Vec<Vec<[f64; 2]>>>),
}

impl Geometry {
    fn points(&self) -> Box<dyn Iterator<Item = [f64; 2]> + '_> {
        match self {
            Geometry::Points(p) => Box::new(p.iter().copied()),
            Geometry::Lines(l) => Box::new(l.iter().flatten().copied()),
            Geometry::Polygons(p) => Box::new(p.iter().flatten().flatten().copied()),
        }
    }
}

fn parse_feature(f: &Value) -> Result<Feature, String> {
    let props = f.get("properties").ok_or("missing properties")?;
    let tags: Vec<String> = props
        .get("tags")
        .and_then(Value::as_array)
        .ok_or("properties.tags must be an array of strings")?
        .iter()
        .map(|t| t.as_str().map(str::to_string).ok_or("tags must be strings"))
        .collect::<Result<_, _>>()?;
    if tags.is_empty() {
        return Err("properties.tags must not be empty".into());
    }
    let depth = match props.get("depth") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().filter(|d| d.is_finite()).ok_or("depth must be a number")?),
    };
    let geom = f.get("geometry").ok_or("missing geometry")?;
    let kind = geom.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    let c = geom.get("coordinates").ok_or("geometry without coordinates")?;
    let geometry = match kind {
        "Point" => Geometry::Points(vec![position(c)?]),
        "MultiPoint" => Geometry::Points(positions(c)?),
        "LineString" => Geometry::Lines(vec![positions(c)?]),
        "MultiLineString" => Geometry::Lines(array(c)?.iter().map(positions).collect::<Result<_, _>>()?),
        "Polygon" => Geometry::Polygons(vec![array(c)?.iter().map(positions).collect::<Result<_, _>>()?]),
        "MultiPolygon" => Geometry::Polygons(
            array(c)?
                .iter()
                .map(|p| array(p)?.iter().map(positions).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?,
        ),
        other => return Err(format!("unsupported geometry type '{other}'")),
    };
    if depth.is_some() && !matches!(geometry, Geometry::Points(_)) {
        return Err("depth is only supported on Point features".into());
    }
    Ok(Feature { tags, depth, geometry })
}

fn array(v: &Value) -> Result<&Vec<Value>, String> {
    v.as_array().ok_or_else(|| "expected an array of coordinates".to_string())
}

fn position(v: &Value) -> Result<[f64; 2], String> {
    let a = array(v)?;
    match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
        (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok([x, y]),
        _ => Err("position must hold two numbers".into()),
    }
}

fn positions(v: &Value) -> Result<Vec<[f64; 2]>, String> {
    array(v)?.iter().map(position).collect()
}
