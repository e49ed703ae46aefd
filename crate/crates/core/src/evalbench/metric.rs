use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// Mean Euclidean distance between aligned position sequences.
///
/// # Panics
/// If the sequences differ in length or are empty.
pub fn mae(estimates: &[Point2], truth: &[Point2]) -> f64 {
    assert_eq!(estimates.len(), truth.len(), "estimate and truth sequences must be aligned");
    assert!(!truth.is_empty(), "MAE of an empty sequence");
    estimates.iter().zip(truth).map(|(a, b)| a.distance(*b)).sum::<f64>() / truth.len() as f64
}

/// Mean, sample standard deviation and median of the finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return Summary { count: 0, mean: f64::NAN, std: f64::NAN, median: f64::NAN };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    v.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Summary { count: n, mean, std, median }
}
