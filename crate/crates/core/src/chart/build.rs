use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use super::layout::{nice_ticks, Frame, CANVAS_HEIGHT, CANVAS_WIDTH, VALUE_PAD};
use super::svg::{self, bind_attrs, color, escape, num, shape};
use super::{
    chart_element_id, element_id, group_element_id, ChartDocument, ChartError, ChartSpec,
    ChartType, DataPayload, ElementId, Geometry, Granularity, Mark, MarkKind, MarkRole,
    Orientation, Shape, VisualElement, CHART_SCHEMA_VERSION,
};
use crate::ingest::{group_series, ColumnKind, Dataset, GroupedSeries};
use crate::stats::{
    compute_quantile_dots, compute_summary, estimate_density, extract_density_features,
    quantile_sorted, truncate_density, DensityEstimate, DensityFeatures, DensityInterval,
    DotBinning, FeatureOptions, IntervalSpec, KdeOptions, QuantileDots, StatsError, SummaryStats,
    DEFAULT_DOT_COUNT, DEFAULT_GRID_POINTS, DEFAULT_PROMINENCE_FRACTION,
};

const DEFAULT_INTERVAL_BAR_MASS: f64 = 0.95;

/// Validates the spec against the dataset, groups the value column, and
/// builds the chart.
pub fn build_chart_from_dataset(spec: &ChartSpec, ds: &Dataset) -> Result<ChartDocument, ChartError> {
    for field in [&spec.group_field, &spec.value_field] {
        ds.column(field)
            .map_err(|_| ChartError::UnknownColumn(field.clone()))?;
    }
    spec.validate_options()?;
    let grouping = group_series(ds, &spec.group_field, &spec.value_field)?;
    let mut doc = build_chart(spec, &grouping.series)?;
    let (_, vcol) = ds.column(&spec.value_field)?;
    if grouping.dropped_rows > 0 {
        doc.warnings.insert(
            0,
            format!(
                "{} row(s) dropped: empty or non-numeric `{}`",
                grouping.dropped_rows, spec.value_field
            ),
        );
    } else if vcol.kind != ColumnKind::Numeric {
        doc.warnings.insert(0, format!("column `{}` is not numeric", spec.value_field));
    }
    Ok(doc)
}

struct GroupStats<'a> {
    label: &'a str,
    summary: SummaryStats,
    sorted: Vec<f64>,
    density: Option<(DensityEstimate, DensityFeatures)>,
    intervals: Vec<DensityInterval>,
    dots: Option<QuantileDots>,
    interval_bar: Option<(f64, f64, f64)>,
}

fn stats_err(label: &str) -> impl Fn(StatsError) -> ChartError + '_ {
    move |source| ChartError::Stats {
        group: label.to_string(),
        source,
    }
}

fn group_stats<'a>(
    spec: &ChartSpec,
    series: &'a GroupedSeries,
    warnings: &mut Vec<String>,
) -> Result<GroupStats<'a>, ChartError> {
    let label = series.group_label.as_str();
    let summary = compute_summary(&series.values).map_err(stats_err(label))?;
    let mut sorted = series.values.clone();
    sorted.sort_by(f64::total_cmp);
    let opts = &spec.options;
    let mut out = GroupStats {
        label,
        summary,
        sorted,
        density: None,
        intervals: Vec::new(),
        dots: None,
        interval_bar: None,
    };

    match spec.chart_type {
        ChartType::Box => {}
        ChartType::Density | ChartType::Violin => {
            let kde = KdeOptions {
                grid_points: opts.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
                bandwidth: opts.bandwidth,
            };
            match estimate_density(&series.values, kde) {
                Ok(d) => {
                    let features = extract_density_features(
                        &d,
                        FeatureOptions {
                            prominence_fraction: opts
                                .prominence_fraction
                                .unwrap_or(DEFAULT_PROMINENCE_FRACTION),
                        },
                    );
                    if spec.chart_type == ChartType::Density {
                        for &m in opts.intervals.as_deref().unwrap_or(&[]) {
                            let role = format!("the central {} of the distribution", percent(m));
                            out.intervals.push(
                                truncate_density(&d, IntervalSpec::CentralMass(m), role)
                                    .map_err(stats_err(label))?,
                            );
                        }
                    }
                    out.density = Some((d, features));
                }
                Err(e @ (StatsError::Degenerate(_) | StatsError::TooFew { .. })) => {
                    warnings.push(format!(
                        "group `{label}`: {e}; rendered with summary marks only"
                    ));
                }
                Err(e) => return Err(stats_err(label)(e)),
            }
        }
        ChartType::QuantileDotplot => {
            let k = opts.k.unwrap_or(DEFAULT_DOT_COUNT);
            let dots = compute_quantile_dots(
                &series.values,
                k,
                DotBinning {
                    bin_width: opts.bin_width,
                },
            )
            .map_err(stats_err(label))?;
            if opts.show_interval_bar.unwrap_or(false) {
                let m = opts.interval_bar_mass.unwrap_or(DEFAULT_INTERVAL_BAR_MASS);
                out.interval_bar = Some((
                    quantile_sorted(&out.sorted, (1.0 - m) / 2.0),
                    quantile_sorted(&out.sorted, (1.0 + m) / 2.0),
                    m,
                ));
            }
            out.dots = Some(dots);
        }
    }
    Ok(out)
}

/// `0.95` -> `95%`, `0.5` -> `50%`, `0.125` -> `12.5%`.
fn percent(m: f64) -> String {
    let p = (m * 1000.0).round() / 10.0;
    if p.fract() == 0.0 {
        format!("{}%", p as i64)
    } else {
        format!("{p}%")
    }
}

fn value_extent(stats: &[GroupStats]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    for g in stats {
        take(g.summary.min);
        take(g.summary.max);
        if let Some((d, _)) = &g.density {
            take(d.grid_x[0]);
            take(d.grid_x[d.grid_x.len() - 1]);
        }
    }
    (lo, hi)
}

/// Accumulates elements and SVG fragments for one chart.
struct Scene {
    frame: Frame,
    elements: Vec<VisualElement>,
    paint: Vec<ElementId>,
    body: String,
}

struct ElementSpec {
    id: ElementId,
    role: MarkRole,
    kind: MarkKind,
    focus: usize,
    shape: Shape,
    geometry: Geometry,
    data: DataPayload,
    role_detail: Option<String>,
    group: Option<ElementId>,
}

impl Scene {
    /// Registers an element-granularity mark and appends its SVG node.
    /// `inner` is extra SVG drawn inside the bound `<g>`; without it the hit
    /// geometry itself is drawn with `style`.
    fn mark(&mut self, el: ElementSpec, class: &str, style: &str, inner: Option<String>) {
        debug_assert!(el.kind.accepts_focus(el.focus), "{} focus {}", el.id, el.focus);
        let attrs = bind_attrs(&el.id, Granularity::Element, el.role.name(), class);
        match inner {
            Some(inner) => {
                let _ = write!(self.body, "<g {attrs}>{inner}</g>");
            }
            None => self.body.push_str(&shape(&el.geometry, &format!("{attrs} {style}"))),
        }
        self.paint.push(el.id.clone());
        self.elements.push(VisualElement {
            id: el.id,
            granularity: Granularity::Element,
            mark: Mark {
                kind: el.kind,
                focus_count: el.focus,
                shape: el.shape,
                geometry: el.geometry,
            },
            role: el.role,
            role_detail: el.role_detail,
            data: el.data,
            group_id: el.group,
            children: Vec::new(),
            context: String::new(),
        });
    }

    fn rect_uw(&self, u0: f64, w0: f64, u1: f64, w1: f64) -> Geometry {
        let (x0, y0) = self.frame.xy(u0, w0);
        let (x1, y1) = self.frame.xy(u1, w1);
        Geometry::rect(x0, y0, x1, y1)
    }

    fn line_uw(&self, u0: f64, w0: f64, u1: f64, w1: f64, tol: f64) -> Geometry {
        let (x0, y0) = self.frame.xy(u0, w0);
        let (x1, y1) = self.frame.xy(u1, w1);
        Geometry::line(x0, y0, x1, y1, tol)
    }

    fn poly_uw(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> Geometry {
        let f = &self.frame;
        Geometry::polygon(pts.into_iter().map(|(u, w)| f.xy(u, w)))
    }
}

fn line_svg(g: &Geometry, attrs: &str) -> String {
    match *g {
        Geometry::Line { x1, y1, x2, y2, .. } => svg::line(x1, y1, x2, y2, attrs),
        _ => String::new(),
    }
}

pub fn build_chart(spec: &ChartSpec, series: &[GroupedSeries]) -> Result<ChartDocument, ChartError> {
    spec.validate_options()?;
    if series.is_empty() {
        return Err(ChartError::NoGroups);
    }
    let mut seen = HashSet::new();
    for s in series {
        if !seen.insert(s.group_label.as_str()) {
            return Err(ChartError::DuplicateGroup(s.group_label.clone()));
        }
    }

    let mut warnings = Vec::new();
    let stats = series
        .iter()
        .map(|s| group_stats(spec, s, &mut warnings))
        .collect::<Result<Vec<_>, _>>()?;

    let (lo, hi) = value_extent(&stats);
    let legend = series.len() > 1;
    let frame = Frame::new(spec.orientation(), nice_ticks(lo, hi), series.len(), legend);
    let mut scene = Scene {
        frame,
        elements: Vec::new(),
        paint: Vec::new(),
        body: String::new(),
    };

    let ymax = stats
        .iter()
        .filter_map(|g| g.density.as_ref())
        .flat_map(|(d, _)| d.density_y.iter().copied())
        .fold(0.0, f64::max);
    let max_bin = stats
        .iter()
        .filter_map(|g| g.dots.as_ref())
        .flat_map(|d| d.bins.iter().map(|b| b.count))
        .max()
        .unwrap_or(1);

    // Axes are painted first so every data mark sits above them.
    let axes = axis_marks(spec, &stats, &mut scene);

    let mut groups = Vec::new();
    let mut group_elements = Vec::new();
    let mut owned: Vec<ElementId> = Vec::new();
    for (gi, g) in stats.iter().enumerate() {
        let ordinal = gi + 1;
        let gid = group_element_id(ordinal);
        let band = scene.frame.band(gi);
        let (ua, ub) = scene.frame.u_span();
        let group_geom = scene.rect_uw(ua - VALUE_PAD, band.0, ub + VALUE_PAD, band.1);

        let first_child = scene.elements.len();
        let body_before = std::mem::take(&mut scene.body);

        match spec.chart_type {
            ChartType::Box => box_marks(spec, &mut scene, g, ordinal, band, 0.25),
            ChartType::Density => match &g.density {
                Some(d) => density_marks(&mut scene, g, d, ordinal, band, ymax),
                None => box_marks(spec, &mut scene, g, ordinal, band, 0.15),
            },
            ChartType::Violin => match &g.density {
                Some(d) => violin_marks(&mut scene, g, d, ordinal, band, ymax),
                None => box_marks(spec, &mut scene, g, ordinal, band, 0.15),
            },
            ChartType::QuantileDotplot => dot_marks(&mut scene, g, ordinal, band, max_bin),
        }

        let children: Vec<ElementId> = scene.elements[first_child..]
            .iter()
            .map(|e| e.id.clone())
            .collect();
        let inner = std::mem::replace(&mut scene.body, body_before);
        let _ = write!(
            scene.body,
            r#"<g {} data-label="{}" fill="{}">{}{}</g>"#,
            bind_attrs(&gid, Granularity::Group, MarkRole::Group.name(), "group"),
            escape(g.label),
            color(gi),
            shape(&group_geom, r#"class="group-hit" fill="none" pointer-events="all""#),
            inner
        );

        owned.extend(children.iter().cloned());
        groups.push(gid.clone());
        group_elements.push(VisualElement {
            id: gid,
            granularity: Granularity::Group,
            mark: Mark {
                kind: MarkKind::Group,
                focus_count: 0,
                shape: Shape::Area,
                geometry: group_geom,
            },
            role: MarkRole::Group,
            role_detail: None,
            data: DataPayload::Group {
                label: g.label.to_string(),
                summary: g.summary.clone(),
                density: g.density.as_ref().map(|(_, f)| f.clone()),
                dots: g.dots.as_ref().map(|d| d.k),
            },
            group_id: None,
            children,
            context: String::new(),
        });
    }

    let mut globals = axes;
    if legend {
        globals.push(legend_mark(&mut scene, &stats));
    }
    if !spec.title.is_empty() {
        globals.push(title_mark(&mut scene, &spec.title));
    }

    let svg = format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" "#,
            r#"viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11" data-chart-type="{t}">"#,
            r##"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##,
            "{body}</svg>"
        ),
        w = num(CANVAS_WIDTH),
        h = num(CANVAS_HEIGHT),
        t = spec.chart_type,
        body = scene.body
    );

    let mut id_list = groups.clone();
    id_list.extend(owned);
    id_list.extend(globals);

    let mut registry = BTreeMap::new();
    for el in group_elements.into_iter().chain(scene.elements) {
        registry.insert(el.id.clone(), el);
    }
    debug_assert_eq!(registry.len(), id_list.len());

    Ok(ChartDocument {
        schema_version: CHART_SCHEMA_VERSION,
        spec: spec.clone(),
        width: CANVAS_WIDTH,
        height: CANVAS_HEIGHT,
        svg,
        registry,
        id_list,
        groups,
        paint_order: scene.paint,
        warnings,
    })
}

/// IQR box, whiskers, median line, outlier dots. `half` is the box
/// half-width as a fraction of the band.
fn box_marks(
    spec: &ChartSpec,
    scene: &mut Scene,
    g: &GroupStats,
    ordinal: usize,
    band: (f64, f64),
    half: f64,
) {
    let s = &g.summary;
    let gid = group_element_id(ordinal);
    let c = 0.5 * (band.0 + band.1);
    let hw = (band.1 - band.0) * half;
    let f = scene.frame.clone();
    let fill = color(ordinal - 1);

    let box_geom = scene.rect_uw(f.u(s.q1), c - hw, f.u(s.q3), c + hw);
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::IqrBox, 1),
            role: MarkRole::IqrBox,
            kind: MarkKind::Summary,
            focus: 2,
            shape: Shape::Area,
            geometry: box_geom,
            data: DataPayload::Range {
                v1: s.q1,
                v2: s.q3,
                label: "interquartile range".into(),
            },
            role_detail: Some("the middle 50% of the values".into()),
            group: Some(gid.clone()),
        },
        "mark summary",
        &format!(r##"fill="{fill}" fill-opacity="0.35" stroke="#333333" stroke-width="1""##),
        None,
    );

    let whiskers = [
        (s.q1, s.lower_whisker, "lower whisker", "the spread of non-outlier values below the box"),
        (s.q3, s.upper_whisker, "upper whisker", "the spread of non-outlier values above the box"),
    ];
    for (i, (from, to, label, detail)) in whiskers.into_iter().enumerate() {
        let stem = scene.line_uw(f.u(from), c, f.u(to), c, 4.0);
        let cap = scene.line_uw(f.u(to), c - hw * 0.5, f.u(to), c + hw * 0.5, 0.0);
        let stroke = r##"stroke="#333333" stroke-width="1.5""##;
        let inner = format!("{}{}", line_svg(&stem, stroke), line_svg(&cap, stroke));
        scene.mark(
            ElementSpec {
                id: element_id(ordinal, MarkRole::Whisker, i + 1),
                role: MarkRole::Whisker,
                kind: MarkKind::Summary,
                focus: 2,
                shape: Shape::Line,
                geometry: stem,
                data: DataPayload::Range {
                    v1: from.min(to),
                    v2: from.max(to),
                    label: label.into(),
                },
                role_detail: Some(detail.into()),
                group: Some(gid.clone()),
            },
            "mark summary",
            "",
            Some(inner),
        );
    }

    let median = scene.line_uw(f.u(s.median), c - hw, f.u(s.median), c + hw, 3.0);
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::MedianLine, 1),
            role: MarkRole::MedianLine,
            kind: MarkKind::Summary,
            focus: 1,
            shape: Shape::Line,
            geometry: median,
            data: DataPayload::Value {
                v: s.median,
                label: "median".into(),
            },
            role_detail: None,
            group: Some(gid.clone()),
        },
        "mark summary",
        r##"stroke="#111111" stroke-width="2""##,
        None,
    );

    if spec.options.show_outliers.unwrap_or(true) {
        for (i, &v) in s.outliers.iter().enumerate() {
            let (x, y) = f.xy(f.u(v), c);
            scene.mark(
                ElementSpec {
                    id: element_id(ordinal, MarkRole::Outlier, i + 1),
                    role: MarkRole::Outlier,
                    kind: MarkKind::Summary,
                    focus: 1,
                    shape: Shape::Point,
                    geometry: Geometry::circle(x, y, 3.5),
                    data: DataPayload::Value {
                        v,
                        label: "outlier".into(),
                    },
                    role_detail: None,
                    group: Some(gid.clone()),
                },
                "mark summary",
                &format!(r##"fill="{fill}" stroke="#333333" stroke-width="0.75""##),
                None,
            );
        }
    }
}

fn density_payload(d: &DensityEstimate, features: &DensityFeatures) -> DataPayload {
    DataPayload::Density {
        features: features.clone(),
        bandwidth: d.bandwidth,
        n: d.n,
        grid_x: d.grid_x.clone(),
        density_y: d.density_y.clone(),
    }
}

fn density_marks(
    scene: &mut Scene,
    g: &GroupStats,
    (d, features): &(DensityEstimate, DensityFeatures),
    ordinal: usize,
    band: (f64, f64),
    ymax: f64,
) {
    let gid = group_element_id(ordinal);
    let f = scene.frame.clone();
    let (base, dir) = f.ridge_base(band, 4.0);
    let height = (band.1 - band.0) - 8.0;
    let w = |y: f64| base + dir * y / ymax * height;
    let fill = color(ordinal - 1);

    let mut outline: Vec<(f64, f64)> = d
        .grid_x
        .iter()
        .zip(&d.density_y)
        .map(|(&x, &y)| (f.u(x), w(y)))
        .collect();
    outline.push((f.u(d.grid_x[d.grid_x.len() - 1]), base));
    outline.push((f.u(d.grid_x[0]), base));
    let area = scene.poly_uw(outline);
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::DensityArea, 1),
            role: MarkRole::DensityArea,
            kind: MarkKind::Continuous,
            focus: d.grid_x.len(),
            shape: Shape::Area,
            geometry: area,
            data: density_payload(d, features),
            role_detail: None,
            group: Some(gid.clone()),
        },
        "mark continuous",
        &format!(r##"fill="{fill}" fill-opacity="0.3" stroke="{fill}" stroke-width="1.5""##),
        None,
    );

    for (i, iv) in g.intervals.iter().enumerate() {
        let mut curve: Vec<(f64, f64)> = vec![(iv.lo, d.density_at(iv.lo))];
        curve.extend(
            d.grid_x
                .iter()
                .zip(&d.density_y)
                .filter(|(&x, _)| x > iv.lo && x < iv.hi)
                .map(|(&x, &y)| (x, y)),
        );
        if curve.len() < 2 {
            let mid = 0.5 * (iv.lo + iv.hi);
            curve.push((mid, d.density_at(mid)));
        }
        curve.push((iv.hi, d.density_at(iv.hi)));
        let focus = curve.len();
        let mut pts: Vec<(f64, f64)> = curve.iter().map(|&(x, y)| (f.u(x), w(y))).collect();
        pts.push((f.u(iv.hi), base));
        pts.push((f.u(iv.lo), base));
        let geometry = scene.poly_uw(pts);
        let opacity = 0.25 + 0.2 * (i as f64 + 1.0) / g.intervals.len() as f64;
        scene.mark(
            ElementSpec {
                id: element_id(ordinal, MarkRole::TruncatedDensity, i + 1),
                role: MarkRole::TruncatedDensity,
                kind: MarkKind::Continuous,
                focus,
                shape: Shape::Area,
                geometry,
                data: DataPayload::Interval {
                    interval: iv.clone(),
                    features: features.clone(),
                },
                role_detail: Some(iv.role.clone()),
                group: Some(gid.clone()),
            },
            "mark continuous",
            &format!(r#"fill="{fill}" fill-opacity="{}" stroke="none""#, num(opacity)),
            None,
        );
    }

    let s = &g.summary;
    for (role, v, label, dash) in [
        (MarkRole::MeanLine, s.mean, "mean", r#" stroke-dasharray="4 2""#),
        (MarkRole::MedianLine, s.median, "median", ""),
    ] {
        let geometry = scene.line_uw(f.u(v), base, f.u(v), w(d.density_at(v)), 3.0);
        scene.mark(
            ElementSpec {
                id: element_id(ordinal, role, 1),
                role,
                kind: MarkKind::Summary,
                focus: 1,
                shape: Shape::Line,
                geometry,
                data: DataPayload::Value {
                    v,
                    label: label.into(),
                },
                role_detail: None,
                group: Some(gid.clone()),
            },
            "mark summary",
            &format!(r##"stroke="#222222" stroke-width="1.5"{dash}"##),
            None,
        );
    }
}

fn violin_marks(
    scene: &mut Scene,
    g: &GroupStats,
    (d, features): &(DensityEstimate, DensityFeatures),
    ordinal: usize,
    band: (f64, f64),
    ymax: f64,
) {
    let gid = group_element_id(ordinal);
    let f = scene.frame.clone();
    let c = 0.5 * (band.0 + band.1);
    let half = (band.1 - band.0) * 0.45;
    let fill = color(ordinal - 1);

    let upper = d
        .grid_x
        .iter()
        .zip(&d.density_y)
        .map(|(&x, &y)| (f.u(x), c + y / ymax * half));
    let lower = d
        .grid_x
        .iter()
        .zip(&d.density_y)
        .rev()
        .map(|(&x, &y)| (f.u(x), c - y / ymax * half));
    let area = scene.poly_uw(upper.chain(lower).collect::<Vec<_>>());
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::ViolinArea, 1),
            role: MarkRole::ViolinArea,
            kind: MarkKind::Continuous,
            focus: d.grid_x.len(),
            shape: Shape::Area,
            geometry: area,
            data: density_payload(d, features),
            role_detail: None,
            group: Some(gid.clone()),
        },
        "mark continuous",
        &format!(r##"fill="{fill}" fill-opacity="0.35" stroke="{fill}" stroke-width="1.5""##),
        None,
    );

    let s = &g.summary;
    let hw = (band.1 - band.0) * 0.05;
    let inner = scene.rect_uw(f.u(s.q1), c - hw, f.u(s.q3), c + hw);
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::IqrBox, 1),
            role: MarkRole::IqrBox,
            kind: MarkKind::Summary,
            focus: 2,
            shape: Shape::Area,
            geometry: inner,
            data: DataPayload::Range {
                v1: s.q1,
                v2: s.q3,
                label: "interquartile range".into(),
            },
            role_detail: Some("the middle 50% of the values".into()),
            group: Some(gid.clone()),
        },
        "mark summary",
        r##"fill="#333333" stroke="none""##,
        None,
    );
    let median = scene.line_uw(f.u(s.median), c - hw, f.u(s.median), c + hw, 3.0);
    scene.mark(
        ElementSpec {
            id: element_id(ordinal, MarkRole::MedianLine, 1),
            role: MarkRole::MedianLine,
            kind: MarkKind::Summary,
            focus: 1,
            shape: Shape::Line,
            geometry: median,
            data: DataPayload::Value {
                v: s.median,
                label: "median".into(),
            },
            role_detail: None,
            group: Some(gid),
        },
        "mark summary",
        r##"stroke="#ffffff" stroke-width="2""##,
        None,
    );
}

fn dot_marks(scene: &mut Scene, g: &GroupStats, ordinal: usize, band: (f64, f64), max_bin: usize) {
    let gid = group_element_id(ordinal);
    let f = scene.frame.clone();
    let dots = g.dots.as_ref().expect("dotplot stats");
    let (base, dir) = f.ridge_base(band, 6.0);
    let fill = color(ordinal - 1);

    let avail = (band.1 - band.0) - 12.0;
    let mut diameter = (avail / max_bin as f64).min(16.0);
    let bin_px = (f.u(dots.bin_width) - f.u(0.0)).abs();
    if bin_px > 0.0 {
        diameter = diameter.min(bin_px);
    }
    let diameter = diameter.max(1.0);
    let r = diameter / 2.0;

    for (i, bin) in dots.bins.iter().enumerate() {
        let u = f.u(bin.center);
        let top = base + dir * diameter * bin.count as f64;
        let geometry = scene.rect_uw(u - r, base, u + r, top);
        let mut inner = String::new();
        for j in 0..bin.count {
            let (x, y) = f.xy(u, base + dir * (r + diameter * j as f64));
            let _ = write!(
                inner,
                r##"<circle cx="{}" cy="{}" r="{}" fill="{fill}" stroke="#ffffff" stroke-width="0.5"/>"##,
                num(x),
                num(y),
                num(r * 0.92)
            );
        }
        scene.mark(
            ElementSpec {
                id: element_id(ordinal, MarkRole::DotBin, i + 1),
                role: MarkRole::DotBin,
                kind: MarkKind::Discretized,
                focus: 3,
                shape: Shape::Glyph,
                geometry,
                data: DataPayload::DotBin {
                    proportion: bin.proportion,
                    center: bin.center,
                    cumulative: bin.cumulative,
                    count: bin.count,
                    k: dots.k,
                    dot_values: dots.dot_values[bin.first_dot..bin.first_dot + bin.count].to_vec(),
                },
                role_detail: None,
                group: Some(gid.clone()),
            },
            "mark discretized",
            "",
            Some(inner),
        );
    }

    if let Some((v1, v2, m)) = g.interval_bar {
        let wbar = base - dir * 3.0;
        let geometry = scene.line_uw(f.u(v1), wbar, f.u(v2), wbar, 3.0);
        scene.mark(
            ElementSpec {
                id: element_id(ordinal, MarkRole::IntervalBar, 1),
                role: MarkRole::IntervalBar,
                kind: MarkKind::Summary,
                focus: 2,
                shape: Shape::Line,
                geometry,
                data: DataPayload::Range {
                    v1,
                    v2,
                    label: format!("{} interval", percent(m)),
                },
                role_detail: Some(format!("the central {} of the values", percent(m))),
                group: Some(gid),
            },
            "mark summary",
            r##"stroke="#222222" stroke-width="2""##,
            None,
        );
    }
}

/// Value axis and group axis; returns their ids (x first).
fn axis_marks(spec: &ChartSpec, stats: &[GroupStats], scene: &mut Scene) -> Vec<ElementId> {
    let f = scene.frame.clone();
    let vertical = f.orientation == Orientation::Vertical;
    let stroke = r##"stroke="#444444" stroke-width="1""##;
    let label_style = r##"fill="#333333""##;

    let value_axis = || -> String {
        let mut out = String::new();
        let (a, b) = f.u_span();
        if vertical {
            out.push_str(&svg::line(f.plot_left, a, f.plot_left, b, stroke));
        } else {
            out.push_str(&svg::line(a, f.plot_bottom, b, f.plot_bottom, stroke));
        }
        for &t in &f.ticks.values {
            let u = f.u(t);
            let label = tick_label(t, f.ticks.step);
            if vertical {
                out.push_str(&svg::line(f.plot_left - 5.0, u, f.plot_left, u, stroke));
                out.push_str(&svg::text(f.plot_left - 8.0, u + 4.0, "end", &label, label_style));
            } else {
                out.push_str(&svg::line(u, f.plot_bottom, u, f.plot_bottom + 5.0, stroke));
                out.push_str(&svg::text(u, f.plot_bottom + 18.0, "middle", &label, label_style));
            }
        }
        out
    };
    let group_axis = || -> String {
        let mut out = String::new();
        if vertical {
            out.push_str(&svg::line(f.plot_left, f.plot_bottom, f.plot_right, f.plot_bottom, stroke));
        } else {
            out.push_str(&svg::line(f.plot_left, f.plot_top, f.plot_left, f.plot_bottom, stroke));
        }
        for (i, g) in stats.iter().enumerate() {
            let (b0, b1) = f.band(i);
            let mid = 0.5 * (b0 + b1);
            if vertical {
                out.push_str(&svg::text(mid, f.plot_bottom + 18.0, "middle", g.label, label_style));
            } else {
                out.push_str(&svg::text(f.plot_left - 8.0, mid + 4.0, "end", g.label, label_style));
            }
        }
        out
    };

    let mid_x = 0.5 * (f.plot_left + f.plot_right);
    let mid_y = 0.5 * (f.plot_top + f.plot_bottom);
    let x_title = svg::text(mid_x, CANVAS_HEIGHT - 8.0, "middle", spec.x_label(), r#"font-size="12""#);
    let y_title = svg::text(
        16.0,
        mid_y,
        "middle",
        spec.y_label(),
        &format!(r#"font-size="12" transform="rotate(-90 16 {})""#, num(mid_y)),
    );

    let (x_inner, y_inner) = if vertical {
        (group_axis(), value_axis())
    } else {
        (value_axis(), group_axis())
    };
    let group_detail = format!("the groups of {}", spec.group_field);
    let value_detail = format!("the values of {}", spec.value_field);
    let (x_detail, y_detail) = if vertical {
        (group_detail, value_detail)
    } else {
        (value_detail, group_detail)
    };

    let x_geom = Geometry::rect(f.plot_left, f.plot_bottom, f.plot_right, CANVAS_HEIGHT);
    let y_geom = Geometry::rect(0.0, f.plot_top, f.plot_left, f.plot_bottom);
    let mut ids = Vec::new();
    for (role, geometry, detail, inner) in [
        (MarkRole::XAxis, x_geom, x_detail, format!("{x_inner}{x_title}")),
        (MarkRole::YAxis, y_geom, y_detail, format!("{y_inner}{y_title}")),
    ] {
        let id = chart_element_id(role);
        ids.push(id.clone());
        scene.mark(
            ElementSpec {
                id,
                role,
                kind: MarkKind::Functional,
                focus: 0,
                shape: Shape::Glyph,
                geometry,
                data: DataPayload::Empty,
                role_detail: Some(detail),
                group: None,
            },
            "mark functional axis",
            "",
            Some(inner),
        );
    }
    ids
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize + usize::from(step * 10f64.powf(-step.log10().floor()) % 1.0 != 0.0)
    };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn legend_mark(scene: &mut Scene, stats: &[GroupStats]) -> ElementId {
    let f = scene.frame.clone();
    let x0 = f.plot_right + 15.0;
    let y0 = f.plot_top;
    let geometry = Geometry::rect(x0, y0, x0 + 100.0, y0 + 8.0 + 18.0 * stats.len() as f64);
    let mut inner = String::new();
    for (i, g) in stats.iter().enumerate() {
        let y = y0 + 6.0 + 18.0 * i as f64;
        let _ = write!(
            inner,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#,
            num(x0 + 4.0),
            num(y),
            color(i)
        );
        inner.push_str(&svg::text(x0 + 20.0, y + 9.0, "start", g.label, ""));
    }
    let id = chart_element_id(MarkRole::Legend);
    scene.mark(
        ElementSpec {
            id: id.clone(),
            role: MarkRole::Legend,
            kind: MarkKind::Functional,
            focus: 0,
            shape: Shape::Glyph,
            geometry,
            data: DataPayload::Empty,
            role_detail: Some("group color coding".into()),
            group: None,
        },
        "mark functional legend",
        "",
        Some(inner),
    );
    id
}

fn title_mark(scene: &mut Scene, title: &str) -> ElementId {
    let geometry = Geometry::rect(0.0, 0.0, CANVAS_WIDTH, 30.0);
    let inner = svg::text(CANVAS_WIDTH / 2.0, 22.0, "middle", title, r#"font-size="14" font-weight="bold""#);
    let id = chart_element_id(MarkRole::Title);
    scene.mark(
        ElementSpec {
            id: id.clone(),
            role: MarkRole::Title,
            kind: MarkKind::Functional,
            focus: 0,
            shape: Shape::Glyph,
            geometry,
            data: DataPayload::Empty,
            role_detail: Some(title.to_string()),
            group: None,
        },
        "mark functional title",
        "",
        Some(inner),
    );
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{hit_test, lookup, Granularity};

    fn series(groups: &[(&str, &[f64])]) -> Vec<GroupedSeries> {
        groups
            .iter()
            .map(|(l, v)| GroupedSeries {
                group_label: l.to_string(),
                values: v.to_vec(),
                unit: None,
            })
            .collect()
    }

    const A: &[f64] = &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
    const B: &[f64] = &[2.0, 3.0, 3.5, 4.0, 5.0, 5.5, 6.0];

    #[test]
    fn box_chart_inventory() {
        let doc = build_chart(&ChartSpec::new(ChartType::Box, "g", "v"), &series(&[("A", A), ("B", B)]))
            .unwrap();
        // 2 groups x (box, 2 whiskers, median) + x axis, y axis, legend + 2 groups.
        assert_eq!(doc.registry.len(), 13);
        assert_eq!(doc.id_list.len(), 13);
        assert_eq!(&doc.id_list[..2], &[ElementId::from("g1"), ElementId::from("g2")]);
        assert!(doc.contains("g1.box1") && doc.contains("g2.whisker2") && doc.contains("chart.legend"));
        assert!(!doc.contains("chart.title"));
        let legend = lookup(&doc, &"chart.legend".into()).unwrap();
        assert!(legend.data.is_empty());
        let g1 = lookup(&doc, &"g1".into()).unwrap();
        assert_eq!(g1.children.len(), 4);
        assert_eq!(
            lookup(&doc, &"g9.box1".into()).unwrap_err(),
            ChartError::NotFound("g9.box1".into())
        );
    }

    #[test]
    fn hit_box_at_both_granularities() {
        let doc = build_chart(&ChartSpec::new(ChartType::Box, "g", "v"), &series(&[("A", A), ("B", B)]))
            .unwrap();
        let b = match doc.registry[&ElementId::from("g1.box1")].mark.geometry {
            Geometry::Rect { x, y, width, height } => (x + width * 0.8, y + height * 0.2),
            _ => unreachable!(),
        };
        assert_eq!(hit_test(&doc, b.0, b.1, Granularity::Element), Some("g1.box1".into()));
        assert_eq!(hit_test(&doc, b.0, b.1, Granularity::Group), Some("g1".into()));
        assert_eq!(hit_test(&doc, -5.0, -5.0, Granularity::Element), None);
    }

    #[test]
    fn degenerate_density_falls_back() {
        let doc = build_chart(
            &ChartSpec::new(ChartType::Violin, "g", "v"),
            &series(&[("A", A), ("C", &[4.0, 4.0, 4.0])]),
        )
        .unwrap();
        assert!(doc.contains("g1.violinArea1"));
        assert!(!doc.contains("g2.violinArea1"));
        assert!(doc.contains("g2.box1") && doc.contains("g2.median1"));
        assert_eq!(doc.warnings.len(), 1);
        assert!(doc.warnings[0].contains("`C`"));
    }

    #[test]
    fn rejects_bad_series() {
        let spec = ChartSpec::new(ChartType::Box, "g", "v");
        assert_eq!(build_chart(&spec, &[]).unwrap_err(), ChartError::NoGroups);
        assert_eq!(
            build_chart(&spec, &series(&[("A", A), ("A", B)])).unwrap_err(),
            ChartError::DuplicateGroup("A".into())
        );
    }

    #[test]
    fn deterministic_svg() {
        let spec = ChartSpec::new(ChartType::Density, "g", "v");
        let s = series(&[("A", A), ("B", B)]);
        assert_eq!(build_chart(&spec, &s).unwrap().svg, build_chart(&spec, &s).unwrap().svg);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.30000000000000004, 0.1), "0.3");
        assert_eq!(tick_label(2.5, 0.25), "2.50");
        assert_eq!(tick_label(20.0, 5.0), "20");
        assert_eq!(tick_label(-0.0, 0.2), "0.0");
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent(0.95), "95%");
        assert_eq!(percent(0.125), "12.5%");
    }
}
