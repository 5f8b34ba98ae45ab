//! Distributional statistics behind every data-bound mark: five-number
//! summaries, Gaussian KDE with feature extraction, truncated density
//! intervals, and quantile-dotplot binning.
//!
//! All functions are pure and deterministic for fixed options.

mod dots;
mod kde;
mod summary;

pub use dots::{compute_quantile_dots, DotBin, DotBinning, QuantileDots, DEFAULT_DOT_COUNT};
pub use kde::{
    estimate_density, extract_density_features, truncate_density, trapezoid, DensityEstimate,
    DensityFeatures, DensityInterval, Extent, FeatureOptions, GridPoint, IntervalSpec,
    KdeOptions, DEFAULT_GRID_POINTS, DEFAULT_PROMINENCE_FRACTION,
};
pub use summary::{compute_summary, quantile_sorted, SummaryStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no values")]
    Empty,
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("all values are identical ({0}); density is degenerate")]
    Degenerate(f64),
    #[error("dot count must be at least 1")]
    InvalidDotCount,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("grid needs at least 3 points, got {0}")]
    InvalidGrid(usize),
    #[error("central mass must lie in (0, 1), got {0}")]
    InvalidMass(f64),
    #[error("interval [{lo}, {hi}] is empty after clipping to the grid")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("bin width must be non-negative and finite, got {0}")]
    InvalidBinWidth(f64),
}

pub(crate) fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StatsError::NonFinite(i)),
        None => Ok(()),
    }
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}
