use serde::{Deserialize, Serialize};

/// Resolved hit region of a mark, in canvas units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Stroked segment; points within `tolerance` of it are hits.
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        tolerance: f64,
    },
    /// Closed polygon, even-odd fill rule.
    Polygon { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Bounds {
    pub fn contains(&self, other: &Bounds) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }
}

/// Canvas coordinates are kept at two decimals so the registry and the SVG
/// text agree exactly.
pub fn snap(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl Geometry {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Geometry::Rect {
            x: snap(xa),
            y: snap(ya),
            width: snap(snap(xb) - snap(xa)),
            height: snap(snap(yb) - snap(ya)),
        }
    }

    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Geometry::Circle {
            cx: snap(cx),
            cy: snap(cy),
            r: snap(r),
        }
    }

    pub fn line(x1: f64, y1: f64, x2: f64, y2: f64, tolerance: f64) -> Self {
        Geometry::Line {
            x1: snap(x1),
            y1: snap(y1),
            x2: snap(x2),
            y2: snap(y2),
            tolerance,
        }
    }

    pub fn polygon(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Geometry::Polygon {
            points: points.into_iter().map(|(x, y)| [snap(x), snap(y)]).collect(),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Geometry::Rect {
                x: rx,
                y: ry,
                width,
                height,
            } => x >= rx && x <= rx + width && y >= ry && y <= ry + height,
            Geometry::Circle { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Geometry::Line {
                x1,
                y1,
                x2,
                y2,
                tolerance,
            } => segment_distance(x, y, x1, y1, x2, y2) <= tolerance,
            Geometry::Polygon { ref points } => {
                let mut inside = false;
                let n = points.len();
                for i in 0..n {
                    let [xi, yi] = points[i];
                    let [xj, yj] = points[(i + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }

    pub fn bounds(&self) -> Bounds {
        match *self {
            Geometry::Rect {
                x,
                y,
                width,
                height,
            } => Bounds {
                x0: x,
                y0: y,
                x1: x + width,
                y1: y + height,
            },
            Geometry::Circle { cx, cy, r } => Bounds {
                x0: cx - r,
                y0: cy - r,
                x1: cx + r,
                y1: cy + r,
            },
            Geometry::Line {
                x1,
                y1,
                x2,
                y2,
                tolerance,
            } => Bounds {
                x0: x1.min(x2) - tolerance,
                y0: y1.min(y2) - tolerance,
                x1: x1.max(x2) + tolerance,
                y1: y1.max(y2) + tolerance,
            },
            Geometry::Polygon { ref points } => points.iter().fold(
                Bounds {
                    x0: f64::INFINITY,
                    y0: f64::INFINITY,
                    x1: f64::NEG_INFINITY,
                    y1: f64::NEG_INFINITY,
                },
                |b, &[x, y]| Bounds {
                    x0: b.x0.min(x),
                    y0: b.y0.min(y),
                    x1: b.x1.max(x),
                    y1: b.y1.max(y),
                },
            ),
        }
    }
}

fn segment_distance(px: f64, py: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let (dx, dy) = (x2 - x1, y2 - y1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - x1) * dx + (py - y1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (x1 + t * dx, y1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}
