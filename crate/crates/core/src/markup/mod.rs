//! Query tags (`[tag: [id: X, data: JSON]]`) and response citations
//! (`[cite: X]`): batch and incremental parsing, validation against an id
//! list, and HTML rendering.
//!
//! Malformed markers are kept as literal text. Segments keep their source
//! text, so joining them reproduces the input byte for byte.

mod scan;

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::chart::ElementId;
use scan::{scan, Marker, Markers, Scan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceRole {
    User,
    Assistant,
}

impl SourceRole {
    /// Users write tags; the assistant writes citations.
    fn markers(self) -> Markers {
        match self {
            SourceRole::User => Markers {
                citations: false,
                tags: true,
            },
            SourceRole::Assistant => Markers {
                citations: true,
                tags: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRef {
    pub id: ElementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub id: ElementId,
    /// 1-based position among the citations of its message.
    pub ordinal: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    Text { text: String },
    Tag(TagRef),
    Citation(Citation),
}

impl Segment {
    pub fn source(&self) -> &str {
        match self {
            Segment::Text { text } => text,
            Segment::Tag(t) => &t.source,
            Segment::Citation(c) => &c.source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedMessage {
    pub segments: Vec<Segment>,
    pub source_role: SourceRole,
}

impl AnnotatedMessage {
    /// The original text.
    pub fn source(&self) -> String {
        self.segments.iter().map(Segment::source).collect()
    }

    pub fn citations(&self) -> impl Iterator<Item = &Citation> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Citation(c) => Some(c),
            _ => None,
        })
    }

    pub fn tags(&self) -> impl Iterator<Item = &TagRef> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Tag(t) => Some(t),
            _ => None,
        })
    }

    /// Text with markers removed.
    pub fn plain_text(&self) -> String {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Text { text } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Kind of a recognized span of raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanKind {
    Text,
    Tag { id: String, data: Option<String> },
    Citation { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub range: Range<usize>,
    pub kind: SpanKind,
}

fn spans(b: &[u8], markers: Markers) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    let push_text = |out: &mut Vec<Span>, r: Range<usize>| {
        if r.is_empty() {
            return;
        }
        match out.last_mut() {
            Some(Span {
                range,
                kind: SpanKind::Text,
            }) if range.end == r.start => range.end = r.end,
            _ => out.push(Span {
                range: r,
                kind: SpanKind::Text,
            }),
        }
    };
    let mut i = 0;
    let mut text_start = 0;
    while i < b.len() {
        if b[i] != b'[' {
            i += 1;
            continue;
        }
        match scan(&b[i..], markers, true) {
            Scan::Match { len, marker } => {
                push_text(&mut out, text_start..i);
                let kind = match marker {
                    Marker::Citation { id } => SpanKind::Citation { id },
                    Marker::Tag { id, data } => SpanKind::Tag { id, data },
                };
                out.push(Span {
                    range: i..i + len,
                    kind,
                });
                i += len;
                text_start = i;
            }
            _ => i += 1,
        }
    }
    push_text(&mut out, text_start..b.len());
    out
}

/// Splits arbitrary bytes into text and marker spans covering the input.
pub fn parse_bytes(bytes: &[u8], role: SourceRole) -> Vec<Span> {
    spans(bytes, role.markers())
}

fn build(text: &str, markers: Markers, role: SourceRole) -> AnnotatedMessage {
    let mut ordinal = 0;
    let segments = spans(text.as_bytes(), markers)
        .into_iter()
        .map(|s| {
            // Marker bytes are ASCII, so span edges are char boundaries.
            let source = text[s.range].to_string();
            match s.kind {
                SpanKind::Text => Segment::Text { text: source },
                SpanKind::Tag { id, data } => Segment::Tag(TagRef {
                    id: ElementId::new(id),
                    data,
                    source,
                }),
                SpanKind::Citation { id } => {
                    ordinal += 1;
                    Segment::Citation(Citation {
                        id: ElementId::new(id),
                        ordinal,
                        source,
                    })
                }
            }
        })
        .collect();
    AnnotatedMessage {
        segments,
        source_role: role,
    }
}

pub fn parse_query_tags(text: &str) -> AnnotatedMessage {
    build(text, SourceRole::User.markers(), SourceRole::User)
}

pub fn parse_citations(text: &str) -> AnnotatedMessage {
    build(text, SourceRole::Assistant.markers(), SourceRole::Assistant)
}

pub fn parse(text: &str, role: SourceRole) -> AnnotatedMessage {
    build(text, role.markers(), role)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Tag,
    Citation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefCheck {
    pub kind: RefKind,
    pub id: ElementId,
    /// Citation ordinal; absent for tags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<usize>,
    /// Index into the message's segments.
    pub segment: usize,
    /// Byte offset of the marker in the message source.
    pub offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: Vec<RefCheck>,
    pub unknown: Vec<RefCheck>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.unknown.is_empty()
    }

    pub fn valid_ids(&self) -> Vec<&ElementId> {
        self.valid.iter().map(|c| &c.id).collect()
    }

    pub fn unknown_ids(&self) -> Vec<&ElementId> {
        self.unknown.iter().map(|c| &c.id).collect()
    }

    pub fn is_unknown_segment(&self, segment: usize) -> bool {
        self.unknown.iter().any(|c| c.segment == segment)
    }
}

pub fn validate(msg: &AnnotatedMessage, ids: &[ElementId]) -> ValidationReport {
    let known: HashSet<&ElementId> = ids.iter().collect();
    let mut report = ValidationReport::default();
    let mut offset = 0;
    for (i, seg) in msg.segments.iter().enumerate() {
        let check = match seg {
            Segment::Text { .. } => None,
            Segment::Tag(t) => Some(RefCheck {
                kind: RefKind::Tag,
                id: t.id.clone(),
                ordinal: None,
                segment: i,
                offset,
            }),
            Segment::Citation(c) => Some(RefCheck {
                kind: RefKind::Citation,
                id: c.id.clone(),
                ordinal: Some(c.ordinal),
                segment: i,
                offset,
            }),
        };
        if let Some(check) = check {
            if known.contains(&check.id) {
                report.valid.push(check);
            } else {
                report.unknown.push(check);
            }
        }
        offset += seg.source().len();
    }
    report
}

pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Citations become numbered `viz-cite` labels and tags become `viz-tag`
/// chips, both carrying `data-element-id`. References listed as unknown in
/// `report` also get the `unresolved` class.
pub fn render_interactive(msg: &AnnotatedMessage, report: &ValidationReport) -> String {
    let mut out = String::new();
    for (i, seg) in msg.segments.iter().enumerate() {
        let unresolved = if report.is_unknown_segment(i) {
            " unresolved"
        } else {
            ""
        };
        match seg {
            Segment::Text { text } => out.push_str(&escape_html(text)),
            Segment::Citation(c) => out.push_str(&format!(
                r#"<span class="viz-cite{unresolved}" data-element-id="{}" data-ordinal="{}">{}</span>"#,
                escape_html(c.id.as_str()),
                c.ordinal,
                c.ordinal
            )),
            Segment::Tag(t) => {
                let data = t
                    .data
                    .as_ref()
                    .map(|d| format!(r#" data-payload="{}""#, escape_html(d)))
                    .unwrap_or_default();
                out.push_str(&format!(
                    r#"<span class="viz-tag{unresolved}" data-element-id="{}"{data}>{}</span>"#,
                    escape_html(t.id.as_str()),
                    escape_html(t.id.as_str())
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum StreamEvent {
    TextDelta { text: String },
    Citation(Citation),
    Tag(TagRef),
    End,
}

/// Incremental parser for one message. Text is released as soon as it
/// cannot belong to a marker; a possible marker prefix is held back until
/// it resolves.
#[derive(Debug)]
pub struct StreamParser {
    role: SourceRole,
    buf: String,
    ordinal: usize,
    finished: bool,
}

impl StreamParser {
    pub fn new(role: SourceRole) -> Self {
        Self {
            role,
            buf: String::new(),
            ordinal: 0,
            finished: false,
        }
    }

    pub fn push(&mut self, chunk: &str) -> Vec<StreamEvent> {
        assert!(!self.finished, "push after finish");
        self.buf.push_str(chunk);
        self.drain(false)
    }

    /// Flushes held-back text and emits `End`.
    pub fn finish(&mut self) -> Vec<StreamEvent> {
        let mut events = self.drain(true);
        self.finished = true;
        events.push(StreamEvent::End);
        events
    }

    /// Text currently held back.
    pub fn pending(&self) -> &str {
        &self.buf
    }

    fn drain(&mut self, is_final: bool) -> Vec<StreamEvent> {
        let markers = self.role.markers();
        let b = self.buf.as_bytes();
        let mut events = Vec::new();
        let mut text_start = 0;
        let mut i = 0;
        let mut held = b.len();
        while i < b.len() {
            if b[i] != b'[' {
                i += 1;
                continue;
            }
            match scan(&b[i..], markers, is_final) {
                Scan::Match { len, marker } => {
                    if text_start < i {
                        events.push(StreamEvent::TextDelta {
                            text: self.buf[text_start..i].to_string(),
                        });
                    }
                    let source = self.buf[i..i + len].to_string();
                    events.push(match marker {
                        Marker::Citation { id } => {
                            self.ordinal += 1;
                            StreamEvent::Citation(Citation {
                                id: ElementId::new(id),
                                ordinal: self.ordinal,
                                source,
                            })
                        }
                        Marker::Tag { id, data } => StreamEvent::Tag(TagRef {
                            id: ElementId::new(id),
                            data,
                            source,
                        }),
                    });
                    i += len;
                    text_start = i;
                }
                Scan::NoMatch => i += 1,
                Scan::Incomplete => {
                    held = i;
                    break;
                }
            }
        }
        if text_start < held {
            events.push(StreamEvent::TextDelta {
                text: self.buf[text_start..held].to_string(),
            });
        }
        self.buf.drain(..held);
        events
    }
}

/// Runs a whole chunk sequence through a fresh parser.
pub fn stream_parse<I, S>(chunks: I, role: SourceRole) -> Vec<StreamEvent>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut p = StreamParser::new(role);
    let mut events = Vec::new();
    for c in chunks {
        events.extend(p.push(c.as_ref()));
    }
    events.extend(p.finish());
    events
}

/// Folds stream events into a message, merging adjacent text deltas.
pub fn flatten(events: &[StreamEvent], role: SourceRole) -> AnnotatedMessage {
    let mut segments: Vec<Segment> = Vec::new();
    for e in events {
        match e {
            StreamEvent::TextDelta { text } => match segments.last_mut() {
                Some(Segment::Text { text: t }) => t.push_str(text),
                _ => segments.push(Segment::Text { text: text.clone() }),
            },
            StreamEvent::Citation(c) => segments.push(Segment::Citation(c.clone())),
            StreamEvent::Tag(t) => segments.push(Segment::Tag(t.clone())),
            StreamEvent::End => {}
        }
    }
    segments.retain(|s| !matches!(s, Segment::Text { text } if text.is_empty()));
    AnnotatedMessage {
        segments,
        source_role: role,
    }
}

/// Serializes a tag reference in the query syntax.
pub fn format_tag(id: &ElementId, data: Option<&str>) -> String {
    match data {
        Some(d) => format!("[tag: [id: {id}, data: {d}]]"),
        None => format!("[tag: [id: {id}]]"),
    }
}

pub fn format_citation(id: &ElementId) -> String {
    format!("[cite: {id}]")
}
