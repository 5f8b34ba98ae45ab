use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_finite, compute_summary, StatsError};

pub const DEFAULT_GRID_POINTS: usize = 256;
pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeOptions {
    pub grid_points: usize,
    /// Overrides Silverman's rule when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl Default for KdeOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            bandwidth: None,
        }
    }
}

/// Gaussian KDE sampled on a uniform grid, normalized so that the
/// trapezoidal integral over the grid is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid_x: Vec<f64>,
    pub density_y: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

impl DensityEstimate {
    pub fn step(&self) -> f64 {
        self.grid_x[1] - self.grid_x[0]
    }

    /// Linear interpolation of the sampled density; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let xs = &self.grid_x;
        if x < xs[0] || x > xs[xs.len() - 1] {
            return 0.0;
        }
        let i = xs.partition_point(|&g| g <= x).clamp(1, xs.len() - 1);
        let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        self.density_y[i - 1] + t * (self.density_y[i] - self.density_y[i - 1])
    }

    /// Running trapezoidal CDF on the grid, pinned to end at exactly one.
    pub fn cdf(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.grid_x.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 1..self.grid_x.len() {
            acc += 0.5 * (self.density_y[i - 1] + self.density_y[i])
                * (self.grid_x[i] - self.grid_x[i - 1]);
            cum.push(acc);
        }
        let total = acc;
        for c in &mut cum {
            *c /= total;
        }
        cum
    }

    /// Trapezoidal integral of the sampled density restricted to `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let xs = &self.grid_x;
        let lo = lo.max(xs[0]);
        let hi = hi.min(xs[xs.len() - 1]);
        if hi <= lo {
            return 0.0;
        }
        let mut pts: Vec<(f64, f64)> = vec![(lo, self.density_at(lo))];
        pts.extend(
            xs.iter()
                .zip(&self.density_y)
                .filter(|(&x, _)| x > lo && x < hi)
                .map(|(&x, &y)| (x, y)),
        );
        pts.push((hi, self.density_at(hi)));
        pts.windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }
}

/// Trapezoidal rule over paired samples.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

fn silverman_bandwidth(values: &[f64]) -> Result<f64, StatsError> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let iqr = compute_summary(values)?.iqr;
    // Heavy ties can leave the IQR at zero while the spread is not.
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * n.powf(-0.2))
}

pub fn estimate_density(values: &[f64], opts: KdeOptions) -> Result<DensityEstimate, StatsError> {
    check_finite(values)?;
    if values.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: values.len(),
        });
    }
    if opts.grid_points < 3 {
        return Err(StatsError::InvalidGrid(opts.grid_points));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if min == max {
        return Err(StatsError::Degenerate(min));
    }
    let h = match opts.bandwidth {
        Some(b) if b.is_finite() && b > 0.0 => b,
        Some(b) => return Err(StatsError::InvalidBandwidth(b)),
        None => silverman_bandwidth(values)?,
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(StatsError::InvalidBandwidth(h));
    }

    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let m = opts.grid_points;
    let step = (hi - lo) / (m - 1) as f64;
    let grid_x: Vec<f64> = (0..m)
        .map(|i| if i == m - 1 { hi } else { lo + step * i as f64 })
        .collect();

    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    let mut density_y: Vec<f64> = grid_x
        .iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();

    let total = trapezoid(&grid_x, &density_y);
    for y in &mut density_y {
        *y /= total;
    }

    Ok(DensityEstimate {
        grid_x,
        density_y,
        bandwidth: h,
        n: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub prominence_fraction: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            prominence_fraction: DEFAULT_PROMINENCE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_start: f64,
    pub x_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFeatures {
    pub extent: Extent,
    pub peaks: Vec<GridPoint>,
    pub troughs: Vec<GridPoint>,
}

/// Topographic prominence of the local maximum at `i`: its height above the
/// higher of the two lowest points reached before climbing above it (or
/// hitting the grid edge) on each side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let peak = y[i];
    let mut left_min = peak;
    for &v in y[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &y[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

pub fn extract_density_features(d: &DensityEstimate, opts: FeatureOptions) -> DensityFeatures {
    let y = &d.density_y;
    let max = y.iter().copied().fold(0.0, f64::max);
    let threshold = opts.prominence_fraction * max;
    let negated: Vec<f64> = y.iter().map(|v| -v).collect();

    let mut peaks = Vec::new();
    let mut troughs = Vec::new();
    // Runs of equal samples (e.g. the two centre points of a symmetric
    // density on an even grid) are treated as one extremum located at the
    // run midpoint and compared against the samples flanking the run.
    let mut a = 1;
    while a + 1 < y.len() {
        let mut b = a;
        while b + 1 < y.len() && y[b + 1] == y[a] {
            b += 1;
        }
        if b + 1 >= y.len() {
            break;
        }
        let point = GridPoint {
            x: 0.5 * (d.grid_x[a] + d.grid_x[b]),
            density: y[a],
        };
        if y[a] > y[a - 1] && y[b] > y[b + 1] && prominence(y, a) >= threshold {
            peaks.push(point);
        } else if y[a] < y[a - 1] && y[b] < y[b + 1] && prominence(&negated, a) >= threshold {
            troughs.push(point);
        }
        a = b + 1;
    }

    DensityFeatures {
        extent: Extent {
            x_start: d.grid_x[0],
            x_end: d.grid_x[d.grid_x.len() - 1],
        },
        peaks,
        troughs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalSpec {
    /// Equal-tailed interval holding this fraction of the mass.
    CentralMass(f64),
    Explicit { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityInterval {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub role: String,
    /// Set when an explicit interval had to be clipped to the grid extent.
    #[serde(default)]
    pub clipped: bool,
}

fn invert_cdf(xs: &[f64], cdf: &[f64], target: f64) -> f64 {
    let i = cdf.partition_point(|&c| c < target).clamp(1, xs.len() - 1);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    if c1 <= c0 {
        return xs[i];
    }
    xs[i - 1] + (target - c0) / (c1 - c0) * (xs[i] - xs[i - 1])
}

pub fn truncate_density(
    d: &DensityEstimate,
    spec: IntervalSpec,
    role: impl Into<String>,
) -> Result<DensityInterval, StatsError> {
    let first = d.grid_x[0];
    let last = d.grid_x[d.grid_x.len() - 1];
    let (lo, hi, clipped) = match spec {
        IntervalSpec::CentralMass(m) => {
            if !(m > 0.0 && m < 1.0) {
                return Err(StatsError::InvalidMass(m));
            }
            let cdf = d.cdf();
            let lo = invert_cdf(&d.grid_x, &cdf, (1.0 - m) / 2.0);
            let hi = invert_cdf(&d.grid_x, &cdf, (1.0 + m) / 2.0);
            (lo, hi, false)
        }
        IntervalSpec::Explicit { lo, hi } => {
            let clipped = lo < first || hi > last;
            (lo.max(first), hi.min(last), clipped)
        }
    };
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(StatsError::InvalidInterval { lo, hi });
    }
    Ok(DensityInterval {
        lo,
        hi,
        mass: d.mass_between(lo, hi),
        role: role.into(),
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> Vec<f64> {
        let half = [0.3, 0.9, 1.4, 2.0, 2.2, 3.1, 4.0];
        half.iter().flat_map(|&v| [v, -v]).collect()
    }

    fn bimodal() -> Vec<f64> {
        // Deterministic unit-spread clusters: normal quantiles at ±10.
        let z: Vec<f64> = (1..=50)
            .map(|i| probit((i as f64 - 0.5) / 50.0))
            .collect();
        z.iter().map(|v| v - 10.0).chain(z.iter().map(|v| v + 10.0)).collect()
    }

    // Acklam's rational approximation; adequate for building fixtures.
    fn probit(p: f64) -> f64 {
        let a = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
            1.38357751867269e+02, -3.066479806614716e+01, 2.506628277459239e+00];
        let b = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
            6.680131188771972e+01, -1.328068155288572e+01];
        let c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
            -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00];
        let d = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
            3.754408661907416e+00];
        let pl = 0.02425;
        if p < pl {
            let q = (-2.0 * p.ln()).sqrt();
            (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
        } else if p <= 1.0 - pl {
            let q = p - 0.5;
            let r = q * q;
            (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
                / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        } else {
            -probit(1.0 - p)
        }
    }

    #[test]
    fn integrates_to_one() {
        let d = estimate_density(&symmetric(), KdeOptions::default()).unwrap();
        let area = trapezoid(&d.grid_x, &d.density_y);
        assert!((area - 1.0).abs() < 1e-12, "{area}");
        assert_eq!(d.grid_x.len(), 256);
        assert!(d.grid_x.windows(2).all(|w| w[0] < w[1]));
        assert!(d.density_y.iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn symmetric_sample_peaks_at_zero() {
        let d = estimate_density(&symmetric(), KdeOptions::default()).unwrap();
        let f = extract_density_features(&d, FeatureOptions::default());
        assert_eq!(f.peaks.len(), 1, "{:?}", f.peaks);
        assert!(f.troughs.is_empty());
        assert!(f.peaks[0].x.abs() < d.step());
    }

    #[test]
    fn silverman_rule() {
        let v = [1.0, 2.0, 3.0, 4.0, 10.0];
        let d = estimate_density(&v, KdeOptions::default()).unwrap();
        // sd = 3.5355..., iqr = 2 -> 2/1.34 = 1.4925...
        let expected = 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2);
        assert!((d.bandwidth - expected).abs() < 1e-12);
        assert!((d.grid_x[0] - (1.0 - 3.0 * expected)).abs() < 1e-12);
        assert_eq!(d.grid_x[255], 10.0 + 3.0 * expected);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert_eq!(
            estimate_density(&[2.0, 2.0, 2.0], KdeOptions::default()).unwrap_err(),
            StatsError::Degenerate(2.0)
        );
        assert!(matches!(
            estimate_density(&[1.0], KdeOptions::default()),
            Err(StatsError::TooFew { .. })
        ));
        let bad = KdeOptions { bandwidth: Some(0.0), ..Default::default() };
        assert!(matches!(
            estimate_density(&[1.0, 2.0], bad),
            Err(StatsError::InvalidBandwidth(_))
        ));
    }

    /// Brute-force KDE at arbitrary x, unnormalized by the grid.
    fn kde_at(values: &[f64], h: f64, x: f64) -> f64 {
        let n = values.len() as f64;
        values
            .iter()
            .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp() / (h * (2.0 * PI).sqrt()))
            .sum::<f64>()
            / n
    }

    #[test]
    fn bimodal_features_match_dense_scan() {
        let values = bimodal();
        let d = estimate_density(&values, KdeOptions::default()).unwrap();
        let f = extract_density_features(&d, FeatureOptions::default());
        assert_eq!(f.peaks.len(), 2, "{:?}", f.peaks);
        assert_eq!(f.troughs.len(), 1, "{:?}", f.troughs);

        // Dense brute-force scan of the exact KDE over the same span.
        let (a, b) = (f.extent.x_start, f.extent.x_end);
        let m = 20_001;
        let xs: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| kde_at(&values, d.bandwidth, x)).collect();
        let mut maxima = vec![];
        let mut minima = vec![];
        for i in 1..m - 1 {
            if ys[i] > ys[i - 1] && ys[i] > ys[i + 1] {
                maxima.push(xs[i]);
            }
            if ys[i] < ys[i - 1] && ys[i] < ys[i + 1] {
                minima.push(xs[i]);
            }
        }
        assert_eq!(maxima.len(), 2);
        assert_eq!(minima.len(), 1);
        let tol = 2.0 * d.step();
        assert!((f.peaks[0].x - maxima[0]).abs() < tol);
        assert!((f.peaks[1].x - maxima[1]).abs() < tol);
        assert!((f.troughs[0].x - minima[0]).abs() < tol);
        assert!((f.peaks[0].x + 10.0).abs() < tol);
        assert!((f.peaks[1].x - 10.0).abs() < tol);
        assert!(f.troughs[0].x.abs() < tol);
    }

    #[test]
    fn feature_neighbor_inequalities() {
        let values = [0.0, 0.1, 0.15, 0.2, 5.0, 5.5, 9.0, 30.0];
        let d = estimate_density(&values, KdeOptions { bandwidth: Some(0.7), ..Default::default() })
            .unwrap();
        let f = extract_density_features(&d, FeatureOptions::default());
        // Flanking samples: last grid point left of x, first right of x.
        let flanks = |x: f64| {
            let r = d.grid_x.partition_point(|&g| g <= x);
            let l = d.grid_x.partition_point(|&g| g < x) - 1;
            (d.density_y[l], d.density_y[r])
        };
        for p in &f.peaks {
            let (l, r) = flanks(p.x);
            assert!(p.density > l && p.density > r);
        }
        for t in &f.troughs {
            let (l, r) = flanks(t.x);
            assert!(t.density < l && t.density < r);
        }
        assert!(f.peaks.windows(2).all(|w| w[0].x < w[1].x));
        assert!(f.extent.x_start < f.extent.x_end);
    }

    #[test]
    fn central_interval_is_symmetric() {
        let d = estimate_density(&symmetric(), KdeOptions::default()).unwrap();
        let iv = truncate_density(&d, IntervalSpec::CentralMass(0.95), "central 95%").unwrap();
        assert!((iv.lo + iv.hi).abs() < 2.0 * d.step(), "{iv:?}");
        assert!((iv.mass - 0.95).abs() < 5e-3, "{}", iv.mass);
    }

    #[test]
    fn central_mass_must_be_open() {
        let d = estimate_density(&symmetric(), KdeOptions::default()).unwrap();
        for m in [0.0, 1.0, 1.5, -0.2] {
            assert_eq!(
                truncate_density(&d, IntervalSpec::CentralMass(m), "x").unwrap_err(),
                StatsError::InvalidMass(m)
            );
        }
    }

    #[test]
    fn half_mass_on_uniform_sample() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let d = estimate_density(&values, KdeOptions::default()).unwrap();
        let iv = truncate_density(&d, IntervalSpec::CentralMass(0.5), "middle half").unwrap();
        // Fine-grid trapezoid of the exact KDE over [lo, hi].
        let m = 100_000;
        let xs: Vec<f64> = (0..m)
            .map(|i| iv.lo + (iv.hi - iv.lo) * i as f64 / (m - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| kde_at(&values, d.bandwidth, x)).collect();
        let fine = trapezoid(&xs, &ys);
        assert!((fine - 0.5).abs() < 0.02, "{fine}");
    }

    #[test]
    fn explicit_interval_is_clipped() {
        let d = estimate_density(&symmetric(), KdeOptions::default()).unwrap();
        let iv = truncate_density(&d, IntervalSpec::Explicit { lo: -1e6, hi: 0.0 }, "left").unwrap();
        assert!(iv.clipped);
        assert_eq!(iv.lo, d.grid_x[0]);
        assert!((iv.mass - 0.5).abs() < 1e-2);
        let none = truncate_density(&d, IntervalSpec::Explicit { lo: 1e6, hi: 2e6 }, "x");
        assert!(matches!(none, Err(StatsError::InvalidInterval { .. })));
    }
}
