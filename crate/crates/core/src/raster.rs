//! Bilinear interpolation on cell-centered rasters and PGM export.

use std::io::{self, Write};

use crate::geometry::{GridSpec, Point2};

/// The four cells surrounding a query point and their bilinear weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub idx: [usize; 4],
    pub weights: [f64; 4],
}

/// Computes the bilinear stencil for `p`, or `None` when `p` is outside the bbox.
///
/// Between the bbox edge and the outermost cell centers the value is held
/// constant along the clamped axis.
pub fn stencil(grid: &GridSpec, p: Point2) -> Option<Stencil> {
    if !grid.bbox.contains(p) {
        return None;
    }
    let fx = ((p.x - grid.bbox.min_x) / grid.cell_width() - 0.5).clamp(0.0, (grid.cols - 1) as f64);
    let fy = ((p.y - grid.bbox.min_y) / grid.cell_height() - 0.5).clamp(0.0, (grid.rows - 1) as f64);
    let c0 = (fx.floor() as usize).min(grid.cols - 2);
    let r0 = (fy.floor() as usize).min(grid.rows - 2);
    let tx = fx - c0 as f64;
    let ty = fy - r0 as f64;
    let base = r0 * grid.cols + c0;
    Some(Stencil {
        idx: [base, base + 1, base + grid.cols, base + grid.cols + 1],
        weights: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
    })
}

impl Stencil {
    /// Weighted sum of `values` over the stencil, skipping zero weights so
    /// that non-finite values in unused cells do not leak in.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.idx
            .iter()
            .zip(self.weights.iter())
            .filter(|(_, &w)| w != 0.0)
            .map(|(&i, &w)| w * values[i])
            .sum()
    }

    /// Indices of the cells that carry nonzero weight.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.idx.iter().zip(self.weights.iter()).filter(|(_, &w)| w != 0.0).map(|(&i, _)| i)
    }
}

/// Writes a binary (P5) PGM of `values` scaled linearly from `[lo, hi]` to
/// `[0, 255]`. Row 0 of the raster is the southern edge, so rows are written
/// in reverse to put north on top. Non-finite cells are written as 0.
pub fn write_pgm<W: Write>(mut out: W, grid: &GridSpec, values: &[f64], lo: f64, hi: f64) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", grid.cols, grid.rows)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut buf = Vec::with_capacity(grid.len());
    for row in (0..grid.rows).rev() {
        for col in 0..grid.cols {
            let v = values[row * grid.cols + col];
            let g = if v.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) * 255.0 } else { 0.0 };
            buf.push(g.round() as u8);
        }
    }
    out.write_all(&buf)
}

/// Min and max over the finite entries of `values`.
pub fn finite_range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn stencil_at_center_is_exact() {
        let g = GridSpec::new(BBox::new(0.0, 0.0, 4.0, 3.0), 3, 4);
        let values: Vec<f64> = (0..12).map(|i| i as f64 * 1.5).collect();
        for idx in 0..12 {
            let s = stencil(&g, g.center_of(idx)).unwrap();
            assert_eq!(s.apply(&values), values[idx]);
        }
        assert!(stencil(&g, Point2::new(-0.1, 1.0)).is_none());
    }

    #[test]
    fn pgm_header_and_size() {
        let g = GridSpec::new(BBox::new(0.0, 0.0, 1.0, 1.0), 2, 3);
        let mut buf = Vec::new();
        write_pgm(&mut buf, &g, &[0.0, 0.5, 1.0, 1.0, f64::NAN, 0.0], 0.0, 1.0).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        let body = &buf[buf.len() - 6..];
        assert_eq!(body, &[255, 0, 0, 0, 128, 255]);
    }
}
