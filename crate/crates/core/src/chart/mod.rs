//! Chart model: the element registry and the SVG scene it is drawn into.
//!
//! Every data-bound node in the SVG carries an `id` equal to a registry key
//! and a `data-granularity` attribute. Elements exist at two granularities:
//! individual marks (`element`) and the per-series aggregate (`group`).
//!
//! Identifiers follow one scheme:
//!
//! * `g{G}` for the group of the G-th series (1-based),
//! * `g{G}.{role}{n}` for the n-th mark of a role within that group,
//! * `chart.{role}` for chart-global functional marks.

mod build;
mod geometry;
mod layout;
mod svg;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_chart, build_chart_from_dataset};
pub use geometry::{Bounds, Geometry};
pub use layout::{nice_ticks, Ticks, CANVAS_HEIGHT, CANVAS_WIDTH};

use crate::ingest::IngestError;
use crate::stats::{DensityFeatures, DensityInterval, StatsError, SummaryStats};

pub const CHART_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("option `{option}` is not valid for {chart_type} charts")]
    InvalidOption {
        option: &'static str,
        chart_type: ChartType,
    },
    #[error("invalid value for option `{option}`: {reason}")]
    OptionValue { option: &'static str, reason: String },
    #[error("chart needs at least one group")]
    NoGroups,
    #[error("duplicate group label `{0}`")]
    DuplicateGroup(String),
    #[error("group `{group}`: {source}")]
    Stats { group: String, source: StatsError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("no element with id `{0}`")]
    NotFound(ElementId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Box,
    Density,
    Violin,
    QuantileDotplot,
}

impl ChartType {
    pub fn noun(self) -> &'static str {
        match self {
            ChartType::Box => "box plot",
            ChartType::Density => "density plot",
            ChartType::Violin => "violin plot",
            ChartType::QuantileDotplot => "quantile dotplot",
        }
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChartType::Box => "box",
            ChartType::Density => "density",
            ChartType::Violin => "violin",
            ChartType::QuantileDotplot => "quantile_dotplot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Groups along x, values along y.
    Vertical,
    /// Values along x, groups stacked along y.
    Horizontal,
}

/// Chart-type-specific options. Setting an option that does not apply to
/// the chart type is rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartOptions {
    /// Box: draw outlier dots (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub show_outliers: Option<bool>,
    /// Density and violin: KDE grid size (default 256).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Density and violin: fixed KDE bandwidth instead of Silverman's rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Density: central-mass fractions drawn as truncated interval areas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<f64>>,
    /// Density and violin: peak/trough prominence threshold (default 0.05).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prominence_fraction: Option<f64>,
    /// Quantile dotplot: number of dots (default 20).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Quantile dotplot: bin width override in value units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// Quantile dotplot: draw a central-quantile interval bar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub show_interval_bar: Option<bool>,
    /// Quantile dotplot: mass of the interval bar (default 0.95).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_bar_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub group_field: String,
    pub value_field: String,
    /// Defaults to vertical for box and violin charts, horizontal otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(default)]
    pub title: String,
    /// Defaults to the field shown on the x axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_label: Option<String>,
    /// Defaults to the field shown on the y axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_label: Option<String>,
    #[serde(default)]
    pub options: ChartOptions,
}

impl ChartSpec {
    pub fn new(chart_type: ChartType, group_field: &str, value_field: &str) -> Self {
        Self {
            chart_type,
            group_field: group_field.to_string(),
            value_field: value_field.to_string(),
            orientation: None,
            title: String::new(),
            x_label: None,
            y_label: None,
            options: ChartOptions::default(),
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation.unwrap_or(match self.chart_type {
            ChartType::Box | ChartType::Violin => Orientation::Vertical,
            ChartType::Density | ChartType::QuantileDotplot => Orientation::Horizontal,
        })
    }

    pub fn x_label(&self) -> &str {
        self.x_label.as_deref().unwrap_or(match self.orientation() {
            Orientation::Vertical => &self.group_field,
            Orientation::Horizontal => &self.value_field,
        })
    }

    pub fn y_label(&self) -> &str {
        self.y_label.as_deref().unwrap_or(match self.orientation() {
            Orientation::Vertical => &self.value_field,
            Orientation::Horizontal => &self.group_field,
        })
    }

    /// Checks that every set option applies to the chart type and holds a
    /// usable value.
    pub fn validate_options(&self) -> Result<(), ChartError> {
        use ChartType::*;
        let o = &self.options;
        let t = self.chart_type;
        let allowed: &[(&'static str, bool, &[ChartType])] = &[
            ("show_outliers", o.show_outliers.is_some(), &[Box]),
            ("grid_points", o.grid_points.is_some(), &[Density, Violin]),
            ("bandwidth", o.bandwidth.is_some(), &[Density, Violin]),
            ("intervals", o.intervals.is_some(), &[Density]),
            ("prominence_fraction", o.prominence_fraction.is_some(), &[Density, Violin]),
            ("k", o.k.is_some(), &[QuantileDotplot]),
            ("bin_width", o.bin_width.is_some(), &[QuantileDotplot]),
            ("show_interval_bar", o.show_interval_bar.is_some(), &[QuantileDotplot]),
            ("interval_bar_mass", o.interval_bar_mass.is_some(), &[QuantileDotplot]),
        ];
        for &(option, set, types) in allowed {
            if set && !types.contains(&t) {
                return Err(ChartError::InvalidOption {
                    option,
                    chart_type: t,
                });
            }
        }
        let bad = |option, reason: String| Err(ChartError::OptionValue { option, reason });
        if let Some(g) = o.grid_points {
            if g < 3 {
                return bad("grid_points", format!("need at least 3, got {g}"));
            }
        }
        if let Some(b) = o.bandwidth {
            if !(b.is_finite() && b > 0.0) {
                return bad("bandwidth", format!("must be positive, got {b}"));
            }
        }
        if let Some(ms) = &o.intervals {
            if let Some(m) = ms.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
                return bad("intervals", format!("central mass must lie in (0, 1), got {m}"));
            }
        }
        if let Some(p) = o.prominence_fraction {
            if !(0.0..1.0).contains(&p) {
                return bad("prominence_fraction", format!("must lie in [0, 1), got {p}"));
            }
        }
        if o.k == Some(0) {
            return bad("k", "must be at least 1".into());
        }
        if let Some(w) = o.bin_width {
            if !(w.is_finite() && w >= 0.0) {
                return bad("bin_width", format!("must be non-negative, got {w}"));
            }
        }
        if let Some(m) = o.interval_bar_mass {
            if !(m > 0.0 && m < 1.0) {
                return bad("interval_bar_mass", format!("must lie in (0, 1), got {m}"));
            }
        }
        Ok(())
    }
}

/// Stable identifier of a visual element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(raw: impl Into<String>) -> Self {
        ElementId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId(s.to_string())
    }
}

impl AsRef<str> for ElementId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// `g{group}.{role}{ordinal}`; ordinals are 1-based.
pub fn element_id(group: usize, role: MarkRole, ordinal: usize) -> ElementId {
    debug_assert!(group >= 1 && ordinal >= 1);
    ElementId(format!("g{group}.{}{ordinal}", role.token()))
}

pub fn group_element_id(group: usize) -> ElementId {
    debug_assert!(group >= 1);
    ElementId(format!("g{group}"))
}

pub fn chart_element_id(role: MarkRole) -> ElementId {
    ElementId(format!("chart.{}", role.token()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Element,
    Group,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Element => "element",
            Granularity::Group => "group",
        }
    }
}

/// Mark taxonomy by numeric encoding. `Group` marks aggregate the element
/// marks of one series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Summary,
    Continuous,
    Discretized,
    Functional,
    Group,
}

impl MarkKind {
    /// Whether `focus_count` numeric foci are consistent with this kind.
    pub fn accepts_focus(self, focus_count: usize) -> bool {
        match self {
            MarkKind::Summary => focus_count == 1 || focus_count == 2,
            MarkKind::Continuous => focus_count >= 3,
            MarkKind::Discretized => focus_count == 3,
            MarkKind::Functional | MarkKind::Group => focus_count == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Point,
    Line,
    Area,
    Glyph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub kind: MarkKind,
    pub focus_count: usize,
    pub shape: Shape,
    pub geometry: Geometry,
}

/// What a mark depicts. The token forms the id; the name is the
/// human-readable role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkRole {
    Group,
    IqrBox,
    Whisker,
    MedianLine,
    MeanLine,
    Outlier,
    DensityArea,
    TruncatedDensity,
    ViolinArea,
    DotBin,
    IntervalBar,
    XAxis,
    YAxis,
    Legend,
    Title,
}

impl MarkRole {
    pub fn token(self) -> &'static str {
        match self {
            MarkRole::Group => "group",
            MarkRole::IqrBox => "box",
            MarkRole::Whisker => "whisker",
            MarkRole::MedianLine => "median",
            MarkRole::MeanLine => "mean",
            MarkRole::Outlier => "outlier",
            MarkRole::DensityArea => "densityArea",
            MarkRole::TruncatedDensity => "interval",
            MarkRole::ViolinArea => "violinArea",
            MarkRole::DotBin => "dotBin",
            MarkRole::IntervalBar => "intervalBar",
            MarkRole::XAxis => "xAxis",
            MarkRole::YAxis => "yAxis",
            MarkRole::Legend => "legend",
            MarkRole::Title => "title",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarkRole::Group => "group",
            MarkRole::IqrBox => "IQR box",
            MarkRole::Whisker => "whisker",
            MarkRole::MedianLine => "median line",
            MarkRole::MeanLine => "mean line",
            MarkRole::Outlier => "outlier dot",
            MarkRole::DensityArea => "density area",
            MarkRole::TruncatedDensity => "truncated density area",
            MarkRole::ViolinArea => "violin area",
            MarkRole::DotBin => "dot bin",
            MarkRole::IntervalBar => "interval bar",
            MarkRole::XAxis => "x axis",
            MarkRole::YAxis => "y axis",
            MarkRole::Legend => "legend",
            MarkRole::Title => "title",
        }
    }
}

/// The statistics slice a mark encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataPayload {
    /// Functional marks encode no data.
    Empty,
    /// One focus: an outlier, a median, a mean.
    Value { v: f64, label: String },
    /// Two foci: box edges, whisker ends, interval bar ends.
    Range { v1: f64, v2: f64, label: String },
    /// A sampled density curve with its extracted features.
    Density {
        features: DensityFeatures,
        bandwidth: f64,
        n: usize,
        grid_x: Vec<f64>,
        density_y: Vec<f64>,
    },
    /// A truncated region of a density curve.
    Interval {
        interval: DensityInterval,
        features: DensityFeatures,
    },
    /// Three foci: proportion, center, cumulative share.
    DotBin {
        proportion: f64,
        center: f64,
        cumulative: f64,
        count: usize,
        k: usize,
        dot_values: Vec<f64>,
    },
    /// Per-series aggregate.
    Group {
        label: String,
        summary: SummaryStats,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<DensityFeatures>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dots: Option<usize>,
    },
}

impl DataPayload {
    pub fn is_empty(&self) -> bool {
        matches!(self, DataPayload::Empty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualElement {
    pub id: ElementId,
    pub granularity: Granularity,
    pub mark: Mark,
    pub role: MarkRole,
    /// Free-text meaning of the mark, used where a template says what the
    /// mark "indicates" (legend, axes, intervals).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_detail: Option<String>,
    pub data: DataPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ElementId>,
    #[serde(default)]
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDocument {
    pub schema_version: u32,
    pub spec: ChartSpec,
    pub width: f64,
    pub height: f64,
    pub svg: String,
    pub registry: BTreeMap<ElementId, VisualElement>,
    /// Groups first, then group-owned elements by owner, then chart-global
    /// marks.
    pub id_list: Vec<ElementId>,
    pub groups: Vec<ElementId>,
    /// Element-granularity marks in paint order (last is topmost).
    pub paint_order: Vec<ElementId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ChartDocument {
    pub fn lookup(&self, id: &ElementId) -> Result<&VisualElement, ChartError> {
        lookup(self, id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.registry.contains_key(&ElementId::from(id))
    }

    /// Elements in `id_list` order.
    pub fn elements(&self) -> impl Iterator<Item = &VisualElement> {
        self.id_list.iter().map(|id| &self.registry[id])
    }
}

pub fn lookup<'a>(doc: &'a ChartDocument, id: &ElementId) -> Result<&'a VisualElement, ChartError> {
    doc.registry
        .get(id)
        .ok_or_else(|| ChartError::NotFound(id.clone()))
}

/// Topmost mark containing `(x, y)` at the requested granularity.
pub fn hit_test(doc: &ChartDocument, x: f64, y: f64, granularity: Granularity) -> Option<ElementId> {
    match granularity {
        Granularity::Element => doc
            .paint_order
            .iter()
            .rev()
            .find(|id| doc.registry[*id].mark.geometry.contains(x, y))
            .cloned(),
        Granularity::Group => doc
            .groups
            .iter()
            .rev()
            .find(|id| doc.registry[*id].mark.geometry.contains(x, y))
            .cloned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_scheme() {
        assert_eq!(element_id(1, MarkRole::IqrBox, 1).as_str(), "g1.box1");
        assert_eq!(element_id(1, MarkRole::Outlier, 2).as_str(), "g1.outlier2");
        assert_eq!(element_id(2, MarkRole::DensityArea, 1).as_str(), "g2.densityArea1");
        assert_eq!(group_element_id(3).as_str(), "g3");
        assert_eq!(chart_element_id(MarkRole::Legend).as_str(), "chart.legend");
    }

    #[test]
    fn focus_rules() {
        assert!(MarkKind::Summary.accepts_focus(1));
        assert!(MarkKind::Summary.accepts_focus(2));
        assert!(!MarkKind::Summary.accepts_focus(3));
        assert!(MarkKind::Continuous.accepts_focus(256));
        assert!(MarkKind::Discretized.accepts_focus(3));
        assert!(MarkKind::Functional.accepts_focus(0));
    }

    #[test]
    fn options_must_match_chart_type() {
        let mut spec = ChartSpec::new(ChartType::Box, "g", "v");
        spec.options.k = Some(20);
        assert_eq!(
            spec.validate_options().unwrap_err(),
            ChartError::InvalidOption {
                option: "k",
                chart_type: ChartType::Box
            }
        );
        let mut spec = ChartSpec::new(ChartType::Density, "g", "v");
        spec.options.intervals = Some(vec![0.5, 1.0]);
        assert!(matches!(
            spec.validate_options(),
            Err(ChartError::OptionValue { option: "intervals", .. })
        ));
    }

    #[test]
    fn spec_json_defaults() {
        let spec: ChartSpec = serde_json::from_str(
            r#"{"chart_type":"quantile_dotplot","group_field":"g","value_field":"v","options":{"k":50}}"#,
        )
        .unwrap();
        assert_eq!(spec.orientation(), Orientation::Horizontal);
        assert_eq!(spec.options.k, Some(50));
        assert_eq!(spec.x_label(), "v");
        let unknown = serde_json::from_str::<ChartSpec>(
            r#"{"chart_type":"box","group_field":"g","value_field":"v","options":{"bogus":1}}"#,
        );
        assert!(unknown.is_err());
    }
}
