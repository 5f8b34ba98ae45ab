use super::Orientation;

pub const CANVAS_WIDTH: f64 = 640.0;
pub const CANVAS_HEIGHT: f64 = 400.0;

const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const LEGEND_WIDTH: f64 = 110.0;

/// Overhang allowed for marks (dots, strokes) past the value range.
pub const VALUE_PAD: f64 = 8.0;

/// Nice-number axis: step from {1, 2, 2.5, 5} x 10^k, aiming for 5 to 8 ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct Ticks {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

pub fn nice_ticks(min: f64, max: f64) -> Ticks {
    let (mut min, mut max) = (min.min(max), min.max(max));
    if min == max {
        let pad = if min == 0.0 { 1.0 } else { min.abs() * 0.1 };
        min -= pad;
        max += pad;
    }
    let span = max - min;
    let base = 10f64.powf((span / 8.0).log10().floor() - 1.0);
    let mut best: Option<(f64, usize)> = None;
    'search: for exp in 0..5 {
        for mult in [1.0, 2.0, 2.5, 5.0] {
            let step = mult * base * 10f64.powi(exp);
            let count = tick_count(min, max, step);
            if (5..=8).contains(&count) {
                best = Some((step, count));
                break 'search;
            }
            let better = match best {
                None => true,
                Some((_, c)) => count.abs_diff(6) < c.abs_diff(6),
            };
            if better {
                best = Some((step, count));
            }
        }
    }
    let (step, count) = best.expect("at least one candidate");
    let lo = (min / step).floor() * step;
    let values: Vec<f64> = (0..count).map(|i| clean(lo + step * i as f64, step)).collect();
    Ticks {
        lo: values[0],
        hi: values[count - 1],
        step,
        values,
    }
}

fn tick_count(min: f64, max: f64, step: f64) -> usize {
    let lo = (min / step).floor();
    let hi = (max / step).ceil();
    (hi - lo) as usize + 1
}

/// Strips accumulation noise such as 0.30000000000000004.
fn clean(v: f64, step: f64) -> f64 {
    let decimals = (-step.log10().floor()).max(0.0) as i32 + 2;
    let f = 10f64.powi(decimals);
    let r = (v * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Maps (value, group-axis position) pairs onto the canvas for either
/// orientation. `u` runs along the value axis, `w` along the group axis.
#[derive(Debug, Clone)]
pub struct Frame {
    pub orientation: Orientation,
    pub plot_left: f64,
    pub plot_right: f64,
    pub plot_top: f64,
    pub plot_bottom: f64,
    pub ticks: Ticks,
    pub groups: usize,
}

impl Frame {
    pub fn new(orientation: Orientation, ticks: Ticks, groups: usize, legend: bool) -> Self {
        let right = MARGIN_RIGHT + if legend { LEGEND_WIDTH } else { 0.0 };
        Self {
            orientation,
            plot_left: MARGIN_LEFT,
            plot_right: CANVAS_WIDTH - right,
            plot_top: MARGIN_TOP,
            plot_bottom: CANVAS_HEIGHT - MARGIN_BOTTOM,
            ticks,
            groups,
        }
    }

    /// Canvas coordinate of a data value along the value axis.
    pub fn u(&self, value: f64) -> f64 {
        let t = (value - self.ticks.lo) / (self.ticks.hi - self.ticks.lo);
        match self.orientation {
            Orientation::Vertical => self.plot_bottom - t * (self.plot_bottom - self.plot_top),
            Orientation::Horizontal => self.plot_left + t * (self.plot_right - self.plot_left),
        }
    }

    /// Value-axis canvas span (low, high) in canvas order.
    pub fn u_span(&self) -> (f64, f64) {
        match self.orientation {
            Orientation::Vertical => (self.plot_top, self.plot_bottom),
            Orientation::Horizontal => (self.plot_left, self.plot_right),
        }
    }

    /// Band of group `index` (0-based) along the group axis.
    pub fn band(&self, index: usize) -> (f64, f64) {
        let (a, b) = match self.orientation {
            Orientation::Vertical => (self.plot_left, self.plot_right),
            Orientation::Horizontal => (self.plot_top, self.plot_bottom),
        };
        let width = (b - a) / self.groups as f64;
        (a + width * index as f64, a + width * (index + 1) as f64)
    }

    /// Converts a (u, w) pair into canvas (x, y).
    pub fn xy(&self, u: f64, w: f64) -> (f64, f64) {
        match self.orientation {
            Orientation::Vertical => (w, u),
            Orientation::Horizontal => (u, w),
        }
    }

    /// Ridge baseline and growth direction inside a band: ridges grow away
    /// from the band start in vertical charts and upward in horizontal ones.
    pub fn ridge_base(&self, band: (f64, f64), pad: f64) -> (f64, f64) {
        match self.orientation {
            Orientation::Vertical => (band.0 + pad, 1.0),
            Orientation::Horizontal => (band.1 - pad, -1.0),
        }
    }
}
