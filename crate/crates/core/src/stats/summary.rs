use serde::{Deserialize, Serialize};

use super::{check_finite, sorted, StatsError};

/// Box-plot summary with Tukey fences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub mean: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Smallest value inside the fences (lower whisker end).
    pub lower_whisker: f64,
    /// Largest value inside the fences (upper whisker end).
    pub upper_whisker: f64,
    /// Values strictly outside the fences, ascending.
    pub outliers: Vec<f64>,
}

/// Linear interpolation between order statistics at position `(n - 1) * p`.
///
/// `sorted` must be ascending and non-empty; `p` is clamped to `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo.min(sorted.len() - 1)];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn compute_summary(values: &[f64]) -> Result<SummaryStats, StatsError> {
    check_finite(values)?;
    let s = sorted(values);
    let n = s.len();
    let q1 = quantile_sorted(&s, 0.25);
    let median = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    // Summing the sorted copy keeps the mean permutation-invariant.
    let mean = s.iter().sum::<f64>() / n as f64;

    let outliers: Vec<f64> = s
        .iter()
        .copied()
        .filter(|&v| v < lower_fence || v > upper_fence)
        .collect();
    let mut inside = s.iter().copied().filter(|&v| v >= lower_fence && v <= upper_fence);
    let lower_whisker = inside.clone().next().unwrap_or(q1).min(q1);
    let upper_whisker = inside.next_back().unwrap_or(q3).max(q3);

    Ok(SummaryStats {
        n,
        min: s[0],
        q1,
        median,
        q3,
        max: s[n - 1],
        iqr,
        mean,
        lower_fence,
        upper_fence,
        lower_whisker,
        upper_whisker,
        outliers,
    })
}
