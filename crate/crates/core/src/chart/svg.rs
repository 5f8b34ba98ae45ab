use std::fmt::Write;

use super::{ElementId, Geometry, Granularity};

pub const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
];

pub fn color(group_index: usize) -> &'static str {
    PALETTE[group_index % PALETTE.len()]
}

/// Fixed two-decimal rendering with trailing zeros trimmed.
pub fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_string(),
        _ => s.to_string(),
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Attributes that bind a node to the registry.
pub fn bind_attrs(id: &ElementId, granularity: Granularity, role: &str, class: &str) -> String {
    format!(
        r#"id="{}" data-granularity="{}" data-role="{}" class="{}""#,
        escape(id.as_str()),
        granularity.as_str(),
        escape(role),
        class
    )
}

/// Renders a geometry as a bare SVG shape with extra attributes.
pub fn shape(geometry: &Geometry, attrs: &str) -> String {
    match geometry {
        Geometry::Rect {
            x,
            y,
            width,
            height,
        } => format!(
            r#"<rect {attrs} x="{}" y="{}" width="{}" height="{}"/>"#,
            num(*x),
            num(*y),
            num(*width),
            num(*height)
        ),
        Geometry::Circle { cx, cy, r } => format!(
            r#"<circle {attrs} cx="{}" cy="{}" r="{}"/>"#,
            num(*cx),
            num(*cy),
            num(*r)
        ),
        Geometry::Line { x1, y1, x2, y2, .. } => format!(
            r#"<line {attrs} x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            num(*x1),
            num(*y1),
            num(*x2),
            num(*y2)
        ),
        Geometry::Polygon { points } => {
            let mut pts = String::new();
            for (i, [x, y]) in points.iter().enumerate() {
                if i > 0 {
                    pts.push(' ');
                }
                let _ = write!(pts, "{},{}", num(*x), num(*y));
            }
            format!(r#"<polygon {attrs} points="{pts}"/>"#)
        }
    }
}

pub fn line(x1: f64, y1: f64, x2: f64, y2: f64, attrs: &str) -> String {
    format!(
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {attrs}/>"#,
        num(x1),
        num(y1),
        num(x2),
        num(y2)
    )
}

pub fn text(x: f64, y: f64, anchor: &str, content: &str, extra: &str) -> String {
    let extra = if extra.is_empty() {
        String::new()
    } else {
        format!(" {extra}")
    };
    format!(
        r#"<text x="{}" y="{}" text-anchor="{anchor}"{extra}>{}</text>"#,
        num(x),
        num(y),
        escape(content)
    )
}
