//! Planar geometry in the local tangent frame (meters).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in the local tangent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Euclidean distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Axis-aligned bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }
}

/// A raster over a bounding box. Cell `(row, col)` has its center at
/// `min + (index + 0.5) * cell size`; row 0 is the southern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BBox,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(bbox: BBox, rows: usize, cols: usize) -> Self {
        Self { bbox, rows, cols }
    }

    /// Checks rows ≥ 2, cols ≥ 2 and a bbox of positive finite area.
    pub fn validate(&self) -> Result<(), String> {
        if self.rows < 2 || self.cols < 2 {
            return Err(format!("grid must be at least 2x2, got {}x{}", self.rows, self.cols));
        }
        let b = &self.bbox;
        let finite = [b.min_x, b.min_y, b.max_x, b.max_y].iter().all(|v| v.is_finite());
        if !finite || b.width() <= 0.0 || b.height() <= 0.0 {
            return Err("grid bbox must have positive finite area".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self) -> f64 {
        self.bbox.width() / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.bbox.height() / self.rows as f64
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.bbox.min_x + (col as f64 + 0.5) * self.cell_width(),
            self.bbox.min_y + (row as f64 + 0.5) * self.cell_height(),
        )
    }

    /// Center of the cell with row-major index `idx`.
    pub fn center_of(&self, idx: usize) -> Point2 {
        self.cell_center(idx / self.cols, idx % self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_cases() {
        let a = Point2::new(3.0, 4.0);
        let b = Point2::new(3.0, 10.0);
        assert_eq!(point_segment_distance(Point2::ZERO, a, b), 5.0);
        assert_eq!(point_segment_distance(Point2::new(3.0, 7.0), a, b), 0.0);
        assert_eq!(point_segment_distance(Point2::new(0.0, 7.0), a, b), 3.0);
        assert_eq!(point_segment_distance(Point2::new(1.0, 1.0), a, a), 13f64.sqrt());
    }

    #[test]
    fn grid_centers() {
        let g = GridSpec::new(BBox::new(0.0, 0.0, 10.0, 20.0), 2, 5);
        assert!(g.validate().is_ok());
        assert_eq!(g.cell_center(0, 0), Point2::new(1.0, 5.0));
        assert_eq!(g.center_of(7), Point2::new(5.0, 15.0));
        assert!(GridSpec::new(g.bbox, 1, 5).validate().is_err());
        assert!(GridSpec::new(BBox::new(0.0, 0.0, 0.0, 1.0), 2, 2).validate().is_err());
    }
}
