//! The chart agent: system prompt assembly, tag resolution, provider
//! abstraction and streamed, citation-checked chat turns.

mod prompt;
mod provider;
mod session;

pub use prompt::{
    assemble_system_prompt, citation_tutorial, prompts_version, suggest_prompts, vlm_prompt, AgentMode, AgentProfile,
    PromptBundle, DEFAULT_MAX_TOKENS, DEFAULT_MODEL, DEFAULT_TEMPERATURE,
};
pub use provider::{
    fetch_visual_features, vlm_request_body, ChartImage, ChatMessage, ChatParams, ChatRole, DeltaStream, LlmProvider,
    MockReply, MockTranscript, OpenAiProvider, OpenAiVlm, ProviderConfig, ProviderError, ScriptedProvider, SseDecoder,
    StubVlm, VlmProvider, API_BASE_ENV, API_KEY_ENV, DEFAULT_API_BASE,
};
pub use session::{chat, now_millis, replay_log, resolve_tags, ChatEvent, ChatSession, LogRecord, Turn};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("missing prompt source: {0}")]
    MissingSource(&'static str),
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
    #[error("turn cancelled")]
    Cancelled,
    #[error("session log: {0}")]
    Log(String),
}
