use std::time::{SystemTime, UNIX_EPOCH};

use futures::StreamExt;
use serde::{Deserialize, Serialize};

use super::prompt::{AgentMode, AgentProfile};
use super::provider::{ChatMessage, ChatParams, ChatRole, LlmProvider};
use super::AgentError;
use crate::chart::{ChartDocument, DataPayload};
use crate::markup::{
    flatten, parse_query_tags, render_interactive, validate, AnnotatedMessage, Segment, SourceRole, StreamEvent,
    StreamParser, ValidationReport,
};
use crate::semantics::serialize_chart_data;

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

/// One question and its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub user: AnnotatedMessage,
    /// The user text as sent to the model, tags expanded.
    pub resolved_user: String,
    pub assistant: AnnotatedMessage,
    pub validation: ValidationReport,
    pub started_at: u64,
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    pub chart_id: String,
    pub profile: AgentProfile,
    /// Kept for audit; fixed when the session is created.
    pub system_prompt: String,
    pub created_at: u64,
    pub turns: Vec<Turn>,
}

/// A line of a session log. The first line is the header; each later line
/// is a completed turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Session {
        id: String,
        chart_id: String,
        profile: AgentProfile,
        system_prompt: String,
        created_at: u64,
    },
    Turn(Turn),
}

impl ChatSession {
    pub fn new(id: impl Into<String>, chart_id: impl Into<String>, profile: AgentProfile, system_prompt: String) -> Self {
        Self {
            id: id.into(),
            chart_id: chart_id.into(),
            profile,
            system_prompt,
            created_at: now_millis(),
            turns: Vec::new(),
        }
    }

    pub fn header(&self) -> LogRecord {
        LogRecord::Session {
            id: self.id.clone(),
            chart_id: self.chart_id.clone(),
            profile: self.profile.clone(),
            system_prompt: self.system_prompt.clone(),
            created_at: self.created_at,
        }
    }

    /// The whole log, one JSON object per line.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let records = std::iter::once(self.header()).chain(self.turns.iter().cloned().map(LogRecord::Turn));
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }

    /// System prompt, every earlier exchange, then the new user text.
    pub fn messages(&self, resolved_user: &str) -> Vec<ChatMessage> {
        let mut m = vec![ChatMessage::new(ChatRole::System, self.system_prompt.clone())];
        for t in &self.turns {
            m.push(ChatMessage::new(ChatRole::User, t.resolved_user.clone()));
            m.push(ChatMessage::new(ChatRole::Assistant, t.assistant.source()));
        }
        m.push(ChatMessage::new(ChatRole::User, resolved_user));
        m
    }
}

pub fn replay_log(text: &str) -> Result<ChatSession, AgentError> {
    let mut session: Option<ChatSession> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord =
            serde_json::from_str(line).map_err(|e| AgentError::Log(format!("line {}: {e}", i + 1)))?;
        match (rec, session.as_mut()) {
            (
                LogRecord::Session {
                    id,
                    chart_id,
                    profile,
                    system_prompt,
                    created_at,
                },
                None,
            ) => {
                session = Some(ChatSession {
                    id,
                    chart_id,
                    profile,
                    system_prompt,
                    created_at,
                    turns: Vec::new(),
                })
            }
            (LogRecord::Turn(t), Some(s)) => s.turns.push(t),
            (LogRecord::Session { .. }, Some(_)) => {
                return Err(AgentError::Log(format!("line {}: second session header", i + 1)))
            }
            (LogRecord::Turn(_), None) => {
                return Err(AgentError::Log(format!("line {}: turn before session header", i + 1)))
            }
        }
    }
    session.ok_or_else(|| AgentError::Log("empty log".into()))
}

/// Expands each tag into a reference the model can read. The baseline only
/// learns the kind of mark and its group, since it has no ids or chart data.
pub fn resolve_tags(msg: &AnnotatedMessage, doc: &ChartDocument, mode: AgentMode) -> String {
    if msg.tags().next().is_none() {
        return msg.source();
    }
    let data = serialize_chart_data(doc);
    let mut out = String::new();
    for seg in &msg.segments {
        match seg {
            Segment::Tag(t) => match (doc.lookup(&t.id), mode) {
                (Ok(e), AgentMode::Full) => {
                    let d = data
                        .entries
                        .get(&e.id)
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| serde_json::to_string(&e.data).expect("payload serializes"));
                    out.push_str(&format!(
                        "[referenced element id={}, role={}, data={d}]",
                        e.id,
                        e.role.name()
                    ));
                }
                (Ok(e), AgentMode::Baseline) => {
                    let owner = match &e.data {
                        DataPayload::Group { .. } => Some(e),
                        _ => e.group_id.as_ref().and_then(|g| doc.lookup(g).ok()),
                    };
                    let group = owner.and_then(|g| match &g.data {
                        DataPayload::Group { label, .. } => Some(label.clone()),
                        _ => None,
                    });
                    match group {
                        Some(label) => out.push_str(&format!("[referenced element role={}, group={label}]", e.role.name())),
                        None => out.push_str(&format!("[referenced element role={}]", e.role.name())),
                    }
                }
                (Err(_), AgentMode::Full) => out.push_str(&format!(
                    "[referenced element id={} could not be resolved: it is not part of this chart]",
                    t.id
                )),
                (Err(_), AgentMode::Baseline) => {
                    out.push_str("[referenced element could not be resolved: it is not part of this chart]")
                }
            },
            other => out.push_str(other.source()),
        }
    }
    out
}

/// Events of one streamed turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ChatEvent {
    TextDelta {
        text: String,
    },
    Citation {
        id: String,
        ordinal: usize,
        source: String,
        resolved: bool,
    },
    Done {
        message: AnnotatedMessage,
        report: ValidationReport,
        html: String,
    },
    Error {
        message: String,
    },
}

/// Runs one turn. Events go to `emit`; returning `false` from it cancels
/// the turn. The turn is appended only when the reply completes, so a
/// failed, cancelled or dropped call leaves the session as it was.
pub async fn chat<F>(
    session: &mut ChatSession,
    doc: &ChartDocument,
    user_text: &str,
    provider: &dyn LlmProvider,
    mut emit: F,
) -> Result<Turn, AgentError>
where
    F: FnMut(ChatEvent) -> bool + Send,
{
    let started_at = now_millis();
    let user = parse_query_tags(user_text);
    let resolved_user = resolve_tags(&user, doc, session.profile.mode);
    let messages = session.messages(&resolved_user);
    let params = ChatParams::from(&session.profile);

    let fail = |e: AgentError, emit: &mut F| {
        emit(ChatEvent::Error { message: e.to_string() });
        e
    };
    let mut stream = match provider.send(&messages, &params).await {
        Ok(s) => s,
        Err(e) => return Err(fail(e.into(), &mut emit)),
    };

    let mut parser = StreamParser::new(SourceRole::Assistant);
    let mut events: Vec<StreamEvent> = Vec::new();
    let mut forward = |batch: Vec<StreamEvent>, emit: &mut F| -> bool {
        let mut open = true;
        for ev in batch {
            let out = match &ev {
                StreamEvent::TextDelta { text } => Some(ChatEvent::TextDelta { text: text.clone() }),
                StreamEvent::Citation(c) => Some(ChatEvent::Citation {
                    id: c.id.to_string(),
                    ordinal: c.ordinal,
                    source: c.source.clone(),
                    resolved: doc.id_list.contains(&c.id),
                }),
                StreamEvent::Tag(_) | StreamEvent::End => None,
            };
            if let Some(out) = out {
                open &= emit(out);
            }
            events.push(ev);
        }
        open
    };

    while let Some(delta) = stream.next().await {
        match delta {
            Ok(text) => {
                if !forward(parser.push(&text), &mut emit) {
                    return Err(AgentError::Cancelled);
                }
            }
            Err(e) => return Err(fail(e.into(), &mut emit)),
        }
    }
    if !forward(parser.finish(), &mut emit) {
        return Err(AgentError::Cancelled);
    }

    let assistant = flatten(&events, SourceRole::Assistant);
    let validation = validate(&assistant, &doc.id_list);
    let html = render_interactive(&assistant, &validation);
    let turn = Turn {
        user,
        resolved_user,
        assistant,
        validation,
        started_at,
        finished_at: now_millis(),
    };
    session.turns.push(turn.clone());
    emit(ChatEvent::Done {
        message: turn.assistant.clone(),
        report: turn.validation.clone(),
        html,
    });
    Ok(turn)
}
