use serde::{Deserialize, Serialize};

use super::{check_finite, quantile_sorted, sorted, StatsError};

pub const DEFAULT_DOT_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DotBinning {
    /// Defaults to `(max - min) / sqrt(k)` over the raw data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotBin {
    pub center: f64,
    pub count: usize,
    pub proportion: f64,
    /// Share of dots in this bin or any bin to its left.
    pub cumulative: f64,
    /// Index of the first dot of this bin in `dot_values`.
    pub first_dot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileDots {
    pub k: usize,
    pub dot_values: Vec<f64>,
    pub bin_width: f64,
    pub bins: Vec<DotBin>,
}

/// Quantile dotplot: `k` dots at the mid-quantiles `(i - 0.5) / k`, stacked by
/// Wilkinson dot binning. A bin opens at its leftmost dot and takes every
/// following dot within `bin_width` of it; its center is the midpoint of its
/// first and last dot.
pub fn compute_quantile_dots(
    values: &[f64],
    k: usize,
    binning: DotBinning,
) -> Result<QuantileDots, StatsError> {
    check_finite(values)?;
    if k == 0 {
        return Err(StatsError::InvalidDotCount);
    }
    let s = sorted(values);
    let dot_values: Vec<f64> = (1..=k)
        .map(|i| quantile_sorted(&s, (i as f64 - 0.5) / k as f64))
        .collect();

    let bin_width = match binning.bin_width {
        Some(w) if w.is_finite() && w >= 0.0 => w,
        Some(w) => return Err(StatsError::InvalidBinWidth(w)),
        None => (s[s.len() - 1] - s[0]) / (k as f64).sqrt(),
    };

    let mut bins = Vec::new();
    let mut start = 0;
    let mut running = 0;
    while start < k {
        let anchor = dot_values[start];
        let mut end = start + 1;
        while end < k && dot_values[end] - anchor <= bin_width {
            end += 1;
        }
        let count = end - start;
        running += count;
        bins.push(DotBin {
            center: 0.5 * (anchor + dot_values[end - 1]),
            count,
            proportion: count as f64 / k as f64,
            cumulative: running as f64 / k as f64,
            first_dot: start,
        });
        start = end;
    }

    Ok(QuantileDots {
        k,
        dot_values,
        bin_width,
        bins,
    })
}
