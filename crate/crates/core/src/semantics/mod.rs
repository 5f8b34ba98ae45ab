//! Semantic context for chart elements, the chart knowledge base built from
//! it, and the feature-level chart data handed to the agent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chart::{
    ChartDocument, ChartSpec, DataPayload, ElementId, Granularity, MarkKind, MarkRole, VisualElement,
};
use crate::stats::{DensityFeatures, DensityInterval, GridPoint};

pub const DEFAULT_SIGNIFICANT_DIGITS: usize = 3;
pub const KNOWLEDGE_SCHEMA_VERSION: u32 = 1;

const DEFAULT_TEMPLATES: &str = include_str!("templates.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("template file: {0}")]
    Parse(String),
    #[error("unknown template key `{0}`")]
    UnknownKey(String),
    #[error("template `{key}` uses unknown slot `{{{slot}}}`")]
    UnknownSlot { key: String, slot: String },
    #[error("template `{key}` has an unterminated slot")]
    UnterminatedSlot { key: String },
    #[error("no template for ({kind}, {role})")]
    MissingTemplate { kind: String, role: String },
    #[error("element `{id}` carries a payload that does not fit its role")]
    PayloadMismatch { id: ElementId },
}

/// Slots each template key may use. Every slot listed here is bound when
/// the key is rendered.
const SLOTS: &[(&str, &[&str])] = &[
    ("summary.outlier", &["v"]),
    ("summary.box", &["v1", "v2", "v2-v1", "role"]),
    ("summary.whisker", &["v1", "v2", "role"]),
    ("summary.median", &["v"]),
    ("summary.mean", &["v"]),
    ("summary.intervalBar", &["v1", "v2", "role"]),
    ("continuous.densityArea", &["x_start", "x_end", "extrema", "x_peak", "x_trough"]),
    ("continuous.violinArea", &["x_start", "x_end", "extrema", "x_peak", "x_trough"]),
    ("continuous.interval", &["x1", "x2", "role", "x_start", "x_end"]),
    ("discretized.dotBin", &["v1", "v2", "v3"]),
    ("functional.legend", &["role"]),
    ("functional.xAxis", &["role"]),
    ("functional.yAxis", &["role"]),
    ("functional.title", &["role"]),
    ("group.summary", &["label", "n", "median", "mean", "q1", "q3", "min", "max"]),
    ("group.density", &["x_start", "x_end", "extrema", "x_peak", "x_trough"]),
    ("group.dots", &["k"]),
    ("chart.summary", &["chart_type", "value_field", "group_field", "groups", "labels"]),
];

fn allowed_slots(key: &str) -> Option<&'static [&'static str]> {
    SLOTS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

enum Piece {
    Text(String),
    Slot(String),
}

struct Template {
    pieces: Vec<Piece>,
}

impl Template {
    fn parse(key: &str, text: &str) -> Result<Self, SemanticsError> {
        let allowed = allowed_slots(key).ok_or_else(|| SemanticsError::UnknownKey(key.into()))?;
        let mut pieces = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| SemanticsError::UnterminatedSlot { key: key.into() })?;
            let slot = &rest[open + 1..open + close];
            if !allowed.contains(&slot) {
                return Err(SemanticsError::UnknownSlot {
                    key: key.into(),
                    slot: slot.into(),
                });
            }
            pieces.push(Piece::Slot(slot.to_string()));
            rest = &rest[open + close + 1..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(Template { pieces })
    }

    fn render(&self, bindings: &BTreeMap<&str, String>) -> String {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                // Slots are checked against the key's binder at load time.
                Piece::Slot(s) => out.push_str(&bindings[s.as_str()]),
            }
        }
        out
    }
}

#[derive(Deserialize)]
struct TemplateFile {
    version: u32,
    templates: BTreeMap<String, String>,
}

/// A validated set of context templates.
pub struct TemplateSet {
    pub version: u32,
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    pub fn from_json(text: &str) -> Result<Self, SemanticsError> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| SemanticsError::Parse(e.to_string()))?;
        let templates = file
            .templates
            .iter()
            .map(|(k, v)| Ok((k.clone(), Template::parse(k, v)?)))
            .collect::<Result<_, SemanticsError>>()?;
        Ok(Self {
            version: file.version,
            templates,
        })
    }

    fn get(&self, kind: &str, role: &str) -> Result<&Template, SemanticsError> {
        self.templates
            .get(&format!("{kind}.{role}"))
            .ok_or_else(|| SemanticsError::MissingTemplate {
                kind: kind.into(),
                role: role.into(),
            })
    }

    /// Renders the context sentence(s) of one element.
    pub fn render(&self, e: &VisualElement, digits: usize) -> Result<String, SemanticsError> {
        let f = |v: f64| format_sig(v, digits);
        let kind = kind_name(e.mark.kind);
        let role = e.role.token();
        let mismatch = || SemanticsError::PayloadMismatch { id: e.id.clone() };
        let mut b: BTreeMap<&str, String> = BTreeMap::new();
        let role_text = e.role_detail.clone().unwrap_or_else(|| e.role.name().to_string());

        if e.granularity == Granularity::Group {
            let DataPayload::Group {
                label,
                summary: s,
                density,
                dots,
            } = &e.data
            else {
                return Err(mismatch());
            };
            b.insert("label", label.clone());
            b.insert("n", s.n.to_string());
            b.insert("median", f(s.median));
            b.insert("mean", f(s.mean));
            b.insert("q1", f(s.q1));
            b.insert("q3", f(s.q3));
            b.insert("min", f(s.min));
            b.insert("max", f(s.max));
            let mut out = self.get("group", "summary")?.render(&b);
            if let Some(features) = density {
                bind_features(&mut b, features, digits);
                out.push(' ');
                out.push_str(&self.get("group", "density")?.render(&b));
            }
            if let Some(k) = dots {
                b.insert("k", k.to_string());
                out.push(' ');
                out.push_str(&self.get("group", "dots")?.render(&b));
            }
            return Ok(out);
        }

        let template = self.get(kind, role)?;
        match (&e.data, e.role) {
            (DataPayload::Empty, _) if e.mark.kind == MarkKind::Functional => {
                b.insert("role", role_text);
            }
            (DataPayload::Value { v, .. }, _) => {
                b.insert("v", f(*v));
            }
            (DataPayload::Range { v1, v2, .. }, _) => {
                b.insert("v1", f(*v1));
                b.insert("v2", f(*v2));
                b.insert("v2-v1", f(v2 - v1));
                b.insert("role", role_text);
            }
            (DataPayload::Density { features, .. }, _) => bind_features(&mut b, features, digits),
            (DataPayload::Interval { interval, features }, _) => {
                b.insert("x1", f(interval.lo));
                b.insert("x2", f(interval.hi));
                b.insert("x_start", f(features.extent.x_start));
                b.insert("x_end", f(features.extent.x_end));
                b.insert("role", role_text);
            }
            (
                DataPayload::DotBin {
                    proportion,
                    center,
                    cumulative,
                    ..
                },
                MarkRole::DotBin,
            ) => {
                b.insert("v1", f(*proportion));
                b.insert("v2", f(*center));
                b.insert("v3", f(*cumulative));
            }
            _ => return Err(mismatch()),
        }
        for slot in template.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(s.as_str()),
            Piece::Text(_) => None,
        }) {
            if !b.contains_key(slot) {
                return Err(mismatch());
            }
        }
        Ok(template.render(&b))
    }

    pub fn chart_summary(&self, doc: &ChartDocument) -> Result<String, SemanticsError> {
        let labels: Vec<String> = doc
            .groups
            .iter()
            .filter_map(|g| match &doc.registry[g].data {
                DataPayload::Group { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect();
        let spec = &doc.spec;
        let n = labels.len();
        let mut b = BTreeMap::new();
        b.insert("chart_type", spec.chart_type.noun().to_string());
        b.insert("value_field", spec.value_field.clone());
        b.insert("group_field", spec.group_field.clone());
        b.insert("groups", format!("{n} group{}", if n == 1 { "" } else { "s" }));
        b.insert("labels", join_list(&labels));
        Ok(self.get("chart", "summary")?.render(&b))
    }
}

fn kind_name(kind: MarkKind) -> &'static str {
    match kind {
        MarkKind::Summary => "summary",
        MarkKind::Continuous => "continuous",
        MarkKind::Discretized => "discretized",
        MarkKind::Functional => "functional",
        MarkKind::Group => "group",
    }
}

fn bind_features(b: &mut BTreeMap<&str, String>, features: &DensityFeatures, digits: usize) {
    let f = |v: f64| format_sig(v, digits);
    let xs = |pts: &[GridPoint]| join_list(&pts.iter().map(|p| f(p.x)).collect::<Vec<_>>());
    b.insert("x_start", f(features.extent.x_start));
    b.insert("x_end", f(features.extent.x_end));
    b.insert("x_peak", xs(&features.peaks));
    b.insert("x_trough", xs(&features.troughs));
    b.insert("extrema", describe_extrema(features, digits));
}

/// "a peak at 0", "peaks at -10 and 10, and a trough at 0".
pub fn describe_extrema(features: &DensityFeatures, digits: usize) -> String {
    let part = |pts: &[GridPoint], one: &str, many: &str| -> Option<String> {
        let xs: Vec<String> = pts.iter().map(|p| format_sig(p.x, digits)).collect();
        match xs.len() {
            0 => None,
            1 => Some(format!("a {one} at {}", xs[0])),
            _ => Some(format!("{many} at {}", join_list(&xs))),
        }
    };
    match (
        part(&features.peaks, "peak", "peaks"),
        part(&features.troughs, "trough", "troughs"),
    ) {
        (Some(p), Some(t)) => format!("{p}, and {t}"),
        (Some(p), None) => p,
        (None, Some(t)) => t,
        (None, None) => "no distinct peak".to_string(),
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Rounds to `digits` significant digits and prints without exponent or
/// trailing zeros. Locale-independent.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let rounded: f64 = sci.parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Renders one element's context with the bundled templates.
pub fn render_context(e: &VisualElement, digits: usize) -> Result<String, SemanticsError> {
    TemplateSet::default().render(e, digits)
}

/// Semantic contexts of every registry element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartKnowledge {
    pub entries: BTreeMap<ElementId, String>,
    pub chart_level_summary: String,
}

/// Per-element data for the agent; continuous marks carry features, not
/// sampled curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub entries: BTreeMap<ElementId, Value>,
}

pub fn build_chart_knowledge(doc: &ChartDocument) -> Result<ChartKnowledge, SemanticsError> {
    build_chart_knowledge_with(doc, &TemplateSet::default(), DEFAULT_SIGNIFICANT_DIGITS)
}

pub fn build_chart_knowledge_with(
    doc: &ChartDocument,
    templates: &TemplateSet,
    digits: usize,
) -> Result<ChartKnowledge, SemanticsError> {
    let entries = doc
        .elements()
        .map(|e| Ok((e.id.clone(), templates.render(e, digits)?)))
        .collect::<Result<_, SemanticsError>>()?;
    Ok(ChartKnowledge {
        entries,
        chart_level_summary: templates.chart_summary(doc)?,
    })
}

/// Copy of the document with every element's `context` filled in.
pub fn annotate(doc: &ChartDocument, knowledge: &ChartKnowledge) -> ChartDocument {
    let mut out = doc.clone();
    for (id, el) in out.registry.iter_mut() {
        if let Some(c) = knowledge.entries.get(id) {
            el.context = c.clone();
        }
    }
    out
}

fn interval_json(iv: &DensityInterval) -> Value {
    json!({ "lo": iv.lo, "hi": iv.hi, "mass": iv.mass, "role": iv.role })
}

pub fn serialize_chart_data(doc: &ChartDocument) -> ChartData {
    let mut entries = BTreeMap::new();
    for e in doc.elements() {
        let mut v = match &e.data {
            DataPayload::Density {
                features, bandwidth, n, ..
            } => {
                let intervals: Vec<Value> = e
                    .group_id
                    .iter()
                    .flat_map(|g| doc.registry[g].children.iter())
                    .filter_map(|c| match &doc.registry[c].data {
                        DataPayload::Interval { interval, .. } => Some(interval_json(interval)),
                        _ => None,
                    })
                    .collect();
                json!({
                    "type": "density",
                    "features": features,
                    "intervals": intervals,
                    "bandwidth": bandwidth,
                    "n": n,
                })
            }
            DataPayload::Interval { interval, features } => json!({
                "type": "interval",
                "interval": interval_json(interval),
                "features": features,
            }),
            other => serde_json::to_value(other).expect("payload serializes"),
        };
        if let Value::Object(map) = &mut v {
            map.insert("role".into(), json!(e.role.name()));
            if let Some(g) = &e.group_id {
                map.insert("group".into(), json!(g));
            }
            if let Some(d) = &e.role_detail {
                map.insert("meaning".into(), json!(d));
            }
        }
        entries.insert(e.id.clone(), v);
    }
    ChartData { entries }
}

/// The exported chart-knowledge file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeFile {
    pub schema_version: u32,
    pub template_version: u32,
    pub spec: ChartSpec,
    pub id_list: Vec<ElementId>,
    pub knowledge: ChartKnowledge,
    pub data: ChartData,
}

pub fn knowledge_file(doc: &ChartDocument) -> Result<KnowledgeFile, SemanticsError> {
    let templates = TemplateSet::default();
    Ok(KnowledgeFile {
        schema_version: KNOWLEDGE_SCHEMA_VERSION,
        template_version: templates.version,
        spec: doc.spec.clone(),
        id_list: doc.id_list.clone(),
        knowledge: build_chart_knowledge_with(doc, &templates, DEFAULT_SIGNIFICANT_DIGITS)?,
        data: serialize_chart_data(doc),
    })
}

/// Ids whose knowledge entry is missing or empty, plus knowledge keys not
/// in the registry.
pub fn knowledge_mismatches(doc: &ChartDocument, k: &ChartKnowledge) -> Vec<ElementId> {
    let reg: BTreeSet<&ElementId> = doc.registry.keys().collect();
    let mut bad: Vec<ElementId> = reg
        .iter()
        .filter(|id| k.entries.get(**id).is_none_or(|c| c.is_empty()))
        .map(|id| (*id).clone())
        .collect();
    bad.extend(k.entries.keys().filter(|id| !reg.contains(id)).cloned());
    bad
}
