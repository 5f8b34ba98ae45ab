use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::chart::{ChartDocument, ChartType, ElementId};
use crate::semantics::{build_chart_knowledge, serialize_chart_data, ChartData, ChartKnowledge, SemanticsError};

#[derive(Debug, Deserialize)]
pub(crate) struct Prompts {
    pub version: u32,
    pub preamble: String,
    pub sections: BTreeMap<String, String>,
    pub chart_knowledge_intro: String,
    pub chart_data_intro: String,
    pub id_list_intro: String,
    pub tutorial: Tutorial,
    pub style: Vec<String>,
    pub vlm_prompt: String,
    pub suggestions: Suggestions,
}

#[derive(Debug, Deserialize)]
pub(crate) struct Tutorial {
    pub intro: String,
    pub examples: Vec<FewShot>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct FewShot {
    pub label: String,
    pub user: String,
    pub assistant: String,
}

#[derive(Debug, Deserialize)]
pub(crate) struct Suggestions {
    pub first: String,
    #[serde(flatten)]
    pub by_type: BTreeMap<String, Vec<String>>,
}

pub(crate) fn prompts() -> &'static Prompts {
    static P: OnceLock<Prompts> = OnceLock::new();
    P.get_or_init(|| serde_json::from_str(include_str!("prompts.json")).expect("bundled prompts parse"))
}

pub fn prompts_version() -> u32 {
    prompts().version
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    #[default]
    Full,
    /// Ablation: no chart data, chart knowledge, id list or citation tutorial.
    Baseline,
}

impl std::str::FromStr for AgentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(AgentMode::Full),
            "baseline" => Ok(AgentMode::Baseline),
            other => Err(format!("unknown mode `{other}` (expected full or baseline)")),
        }
    }
}

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub mode: AgentMode,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AgentProfile {
    fn default() -> Self {
        Self {
            mode: AgentMode::Full,
            model: DEFAULT_MODEL.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl AgentProfile {
    pub fn with_mode(mode: AgentMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// The information sources the system prompt is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub chart_spec_text: String,
    pub data_description: Option<String>,
    pub chart_knowledge: Option<ChartKnowledge>,
    pub chart_data: Option<ChartData>,
    pub visual_features: Option<String>,
    pub id_list: Vec<ElementId>,
    pub citation_tutorial: String,
}

impl PromptBundle {
    pub fn new(
        doc: &ChartDocument,
        knowledge: ChartKnowledge,
        data: ChartData,
        data_description: Option<String>,
        visual_features: Option<String>,
    ) -> Self {
        Self {
            chart_spec_text: serde_json::to_string_pretty(&doc.spec).expect("spec serializes"),
            data_description: data_description.filter(|d| !d.trim().is_empty()),
            chart_knowledge: Some(knowledge),
            chart_data: Some(data),
            visual_features: visual_features.filter(|d| !d.trim().is_empty()),
            id_list: doc.id_list.clone(),
            citation_tutorial: citation_tutorial(),
        }
    }
}

impl PromptBundle {
    /// Derives chart knowledge and chart data from the document.
    pub fn from_document(
        doc: &ChartDocument,
        data_description: Option<String>,
        visual_features: Option<String>,
    ) -> Result<Self, SemanticsError> {
        let knowledge = build_chart_knowledge(doc)?;
        Ok(Self::new(doc, knowledge, serialize_chart_data(doc), data_description, visual_features))
    }
}

/// Instructions and few-shot exchanges for the `[cite: ID]` syntax.
pub fn citation_tutorial() -> String {
    let t = &prompts().tutorial;
    let mut out = t.intro.clone();
    for (i, ex) in t.examples.iter().enumerate() {
        let _ = write!(
            out,
            "\n\nExample {} ({}):\nReader: {}\nAssistant: {}",
            i + 1,
            ex.label.to_lowercase(),
            ex.user,
            ex.assistant
        );
    }
    out
}

fn section(out: &mut String, key: &str, body: &str) {
    let title = &prompts().sections[key];
    let _ = write!(out, "\n\n## {title}\n{body}");
}

/// Deterministic system prompt. Sections appear in a fixed order; the
/// baseline keeps only the preamble, specification, data description and
/// visual features.
pub fn assemble_system_prompt(bundle: &PromptBundle, profile: &AgentProfile) -> Result<String, AgentError> {
    let p = prompts();
    let full = profile.mode == AgentMode::Full;
    if bundle.chart_spec_text.trim().is_empty() {
        return Err(AgentError::MissingSource("chart specification"));
    }
    let mut out = p.preamble.clone();
    section(&mut out, "chart_spec", &format!("```json\n{}\n```", bundle.chart_spec_text));
    if let Some(d) = &bundle.data_description {
        section(&mut out, "data_description", d);
    }
    if full {
        let knowledge = bundle
            .chart_knowledge
            .as_ref()
            .ok_or(AgentError::MissingSource("chart knowledge"))?;
        let data = bundle.chart_data.as_ref().ok_or(AgentError::MissingSource("chart data"))?;
        if bundle.id_list.is_empty() {
            return Err(AgentError::MissingSource("id list"));
        }
        if bundle.citation_tutorial.trim().is_empty() {
            return Err(AgentError::MissingSource("citation tutorial"));
        }

        let mut body = format!("{}\n{}\n", knowledge.chart_level_summary, p.chart_knowledge_intro);
        for id in &bundle.id_list {
            if let Some(c) = knowledge.entries.get(id) {
                let _ = write!(body, "\n- {id}: {c}");
            }
        }
        section(&mut out, "chart_knowledge", &body);

        let mut ordered = serde_json::Map::new();
        for id in &bundle.id_list {
            if let Some(v) = data.entries.get(id) {
                ordered.insert(id.to_string(), v.clone());
            }
        }
        let json = serde_json::to_string(&serde_json::Value::Object(ordered)).expect("data serializes");
        section(&mut out, "chart_data", &format!("{}\n```json\n{json}\n```", p.chart_data_intro));
    }
    if let Some(v) = &bundle.visual_features {
        section(&mut out, "visual_features", v);
    }
    if full {
        let mut ids = p.id_list_intro.clone();
        ids.push('\n');
        for id in &bundle.id_list {
            let _ = write!(ids, "\n- {id}");
        }
        section(&mut out, "id_list", &ids);
        section(&mut out, "citation_tutorial", &bundle.citation_tutorial);
        let rules: Vec<String> = p.style.iter().map(|r| format!("- {r}")).collect();
        section(&mut out, "style", &rules.join("\n"));
    }
    Ok(out)
}

/// Three prompt suggestions. The first set opens with the general reading
/// question; later sets rotate through chart-type starters.
pub fn suggest_prompts(doc: &ChartDocument, turns_so_far: usize) -> Vec<String> {
    suggestions_for(doc.spec.chart_type, turns_so_far)
}

fn suggestions_for(chart_type: ChartType, turns_so_far: usize) -> Vec<String> {
    let s = &prompts().suggestions;
    let pool = &s.by_type[&chart_type.to_string()];
    if turns_so_far == 0 {
        return vec![s.first.clone(), pool[0].clone(), pool[1].clone()];
    }
    (0..3)
        .map(|i| pool[(2 + (turns_so_far - 1) * 3 + i) % pool.len()].clone())
        .collect()
}

pub fn vlm_prompt() -> &'static str {
    &prompts().vlm_prompt
}
