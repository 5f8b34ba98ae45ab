use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use base64::Engine;
use futures::stream::{self, BoxStream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{vlm_prompt, AgentProfile, DEFAULT_MODEL};

pub const API_KEY_ENV: &str = "CHARTALK_API_KEY";
pub const API_BASE_ENV: &str = "CHARTALK_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("request failed: {0}")]
    Http(String),
    #[error("provider returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed provider response: {0}")]
    Decode(String),
    #[error("no API key; set {API_KEY_ENV}")]
    MissingKey,
    #[error("scripted provider has no replies left")]
    Exhausted,
    #[error("{0}")]
    Scripted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: ChatRole, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl From<&AgentProfile> for ChatParams {
    fn from(p: &AgentProfile) -> Self {
        Self {
            model: p.model.clone(),
            temperature: p.temperature,
            max_tokens: p.max_tokens,
        }
    }
}

pub type DeltaStream = BoxStream<'static, Result<String, ProviderError>>;

/// A chat model that streams its reply as text deltas.
#[async_trait]
pub trait LlmProvider: Send + Sync {
    async fn send(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<DeltaStream, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_API_BASE.into(),
            api_key: None,
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    /// Reads the key (and optionally the base URL) from the environment.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        c.apply_env();
        c
    }

    pub fn apply_env(&mut self) {
        if let Ok(base) = std::env::var(API_BASE_ENV) {
            if !base.trim().is_empty() {
                self.base_url = base;
            }
        }
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty());
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn client(&self) -> reqwest::Client {
        reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .read_timeout(Duration::from_secs(self.timeout_secs))
            .build()
            .expect("http client")
    }
}

/// Splits a server-sent-event byte stream into `data` payloads.
#[derive(Debug, Default)]
pub struct SseDecoder {
    buf: Vec<u8>,
    data: Vec<String>,
}

impl SseDecoder {
    pub fn push(&mut self, bytes: &[u8]) -> Vec<String> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        while let Some(nl) = self.buf.iter().position(|&b| b == b'\n') {
            let mut line: Vec<u8> = self.buf.drain(..=nl).collect();
            line.pop();
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            let line = String::from_utf8_lossy(&line);
            if line.is_empty() {
                if !self.data.is_empty() {
                    out.push(self.data.join("\n"));
                    self.data.clear();
                }
            } else if let Some(rest) = line.strip_prefix("data:") {
                self.data.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            }
        }
        out
    }

    /// Payload of an event left unterminated at end of stream.
    pub fn finish(&mut self) -> Option<String> {
        let tail = std::mem::take(&mut self.buf);
        if let Some(rest) = String::from_utf8_lossy(&tail).strip_prefix("data:") {
            self.data.push(rest.trim_start_matches(' ').trim_end_matches('\r').to_string());
        }
        (!self.data.is_empty()).then(|| std::mem::take(&mut self.data).join("\n"))
    }
}

enum Chunk {
    Delta(String),
    Done,
}

fn decode_chunk(data: &str) -> Result<Chunk, ProviderError> {
    if data.trim() == "[DONE]" {
        return Ok(Chunk::Done);
    }
    let v: Value = serde_json::from_str(data).map_err(|e| ProviderError::Decode(e.to_string()))?;
    if let Some(err) = v.get("error") {
        return Err(ProviderError::Decode(err.to_string()));
    }
    let text = v
        .pointer("/choices/0/delta/content")
        .and_then(Value::as_str)
        .unwrap_or_default();
    Ok(Chunk::Delta(text.to_string()))
}

/// Chat-completions client with streamed responses.
#[derive(Debug, Clone)]
pub struct OpenAiProvider {
    config: ProviderConfig,
    client: reqwest::Client,
}

impl OpenAiProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let client = config.client();
        Self { config, client }
    }
}

pub fn chat_request_body(messages: &[ChatMessage], params: &ChatParams) -> Value {
    json!({
        "model": params.model,
        "messages": messages,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "stream": true,
    })
}

struct SseState {
    body: BoxStream<'static, reqwest::Result<Vec<u8>>>,
    decoder: SseDecoder,
    queue: VecDeque<Result<String, ProviderError>>,
    done: bool,
}

impl SseState {
    fn feed(&mut self, payloads: Vec<String>) {
        for data in payloads {
            if self.done {
                return;
            }
            match decode_chunk(&data) {
                Ok(Chunk::Delta(t)) if !t.is_empty() => self.queue.push_back(Ok(t)),
                Ok(Chunk::Delta(_)) => {}
                Ok(Chunk::Done) => self.done = true,
                Err(e) => {
                    self.queue.push_back(Err(e));
                    self.done = true;
                }
            }
        }
    }
}

#[async_trait]
impl LlmProvider for OpenAiProvider {
    async fn send(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<DeltaStream, ProviderError> {
        let key = self.config.api_key.as_deref().ok_or(ProviderError::MissingKey)?;
        let resp = self
            .client
            .post(self.config.endpoint())
            .bearer_auth(key)
            .json(&chat_request_body(messages, params))
            .send()
            .await
            .map_err(|e| ProviderError::Http(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(ProviderError::Status {
                code: status.as_u16(),
                body,
            });
        }
        let state = SseState {
            body: resp.bytes_stream().map(|r| r.map(|b| b.to_vec())).boxed(),
            decoder: SseDecoder::default(),
            queue: VecDeque::new(),
            done: false,
        };
        let s = stream::unfold(state, |mut st| async move {
            loop {
                if let Some(item) = st.queue.pop_front() {
                    return Some((item, st));
                }
                if st.done {
                    return None;
                }
                match st.body.next().await {
                    Some(Ok(bytes)) => {
                        let payloads = st.decoder.push(&bytes);
                        st.feed(payloads);
                    }
                    Some(Err(e)) => {
                        st.done = true;
                        return Some((Err(ProviderError::Http(e.to_string())), st));
                    }
                    None => {
                        let tail = st.decoder.finish().into_iter().collect();
                        st.feed(tail);
                        st.done = true;
                    }
                }
            }
        });
        Ok(s.boxed())
    }
}

/// One scripted reply. Exactly one of `chunks` or `text` supplies the
/// content; `error` alone fails the request, and with `fail_after` it
/// fails the stream after that many chunks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockReply {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chunks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_after: Option<usize>,
}

impl MockReply {
    pub fn chunks(chunks: &[&str]) -> Self {
        Self {
            chunks: chunks.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn error(message: &str) -> Self {
        Self {
            error: Some(message.into()),
            ..Self::default()
        }
    }

    fn pieces(&self) -> Vec<String> {
        match &self.text {
            None => self.chunks.clone(),
            Some(t) => {
                let size = self.chunk_size.unwrap_or(usize::MAX).max(1);
                let chars: Vec<char> = t.chars().collect();
                chars.chunks(size).map(|c| c.iter().collect()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockTranscript {
    pub replies: Vec<MockReply>,
    /// Pause before each chunk.
    #[serde(default)]
    pub delay_ms: u64,
    /// Start over once the replies run out.
    #[serde(default)]
    pub cycle: bool,
}

impl MockTranscript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Offline provider replaying a transcript; records every request.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: MockTranscript,
    next: Mutex<usize>,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedProvider {
    pub fn new(script: MockTranscript) -> Self {
        Self {
            script,
            next: Mutex::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn replies(replies: Vec<MockReply>) -> Self {
        Self::new(MockTranscript {
            replies,
            ..MockTranscript::default()
        })
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().unwrap().clone()
    }
}

#[async_trait]
impl LlmProvider for ScriptedProvider {
    async fn send(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<DeltaStream, ProviderError> {
        self.requests.lock().unwrap().push(messages.to_vec());
        let reply = {
            let mut next = self.next.lock().unwrap();
            let n = self.script.replies.len();
            if n == 0 || (*next >= n && !self.script.cycle) {
                return Err(ProviderError::Exhausted);
            }
            let r = self.script.replies[*next % n].clone();
            *next += 1;
            r
        };
        let mut items: Vec<Result<String, ProviderError>> = reply.pieces().into_iter().map(Ok).collect();
        match (&reply.error, reply.fail_after) {
            (Some(e), None) => return Err(ProviderError::Scripted(e.clone())),
            (e, Some(k)) => {
                items.truncate(k);
                let msg = e.clone().unwrap_or_else(|| "scripted stream failure".into());
                items.push(Err(ProviderError::Scripted(msg)));
            }
            (None, None) => {}
        }
        let delay = Duration::from_millis(self.script.delay_ms);
        Ok(stream::iter(items)
            .then(move |item| async move {
                if !delay.is_zero() {
                    tokio::time::sleep(delay).await;
                }
                item
            })
            .boxed())
    }
}

/// A rendered chart snapshot for the vision model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartImage {
    pub mime: String,
    pub bytes: Vec<u8>,
}

impl ChartImage {
    pub fn new(mime: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            mime: mime.into(),
            bytes,
        }
    }

    pub fn data_url(&self) -> String {
        format!(
            "data:{};base64,{}",
            self.mime,
            base64::engine::general_purpose::STANDARD.encode(&self.bytes)
        )
    }
}

#[async_trait]
pub trait VlmProvider: Send + Sync {
    async fn describe(&self, image: &ChartImage, prompt: &str) -> Result<String, ProviderError>;
}

pub fn vlm_request_body(model: &str, image: &ChartImage, prompt: &str) -> Value {
    json!({
        "model": model,
        "temperature": 0.0,
        "messages": [{
            "role": "user",
            "content": [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": image.data_url()}},
            ],
        }],
    })
}

#[derive(Debug, Clone)]
pub struct OpenAiVlm {
    config: ProviderConfig,
    model: String,
    client: reqwest::Client,
}

impl OpenAiVlm {
    pub fn new(config: ProviderConfig) -> Self {
        let client = config.client();
        Self {
            config,
            model: DEFAULT_MODEL.into(),
            client,
        }
    }
}

#[async_trait]
impl VlmProvider for OpenAiVlm {
    async fn describe(&self, image: &ChartImage, prompt: &str) -> Result<String, ProviderError> {
        let key = self.config.api_key.as_deref().ok_or(ProviderError::MissingKey)?;
        let resp = self
            .client
            .post(self.config.endpoint())
            .bearer_auth(key)
            .json(&vlm_request_body(&self.model, image, prompt))
            .send()
            .await
            .map_err(|e| ProviderError::Http(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().await.map_err(|e| ProviderError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                code: status.as_u16(),
                body,
            });
        }
        let v: Value = serde_json::from_str(&body).map_err(|e| ProviderError::Decode(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Decode("no message content".into()))
    }
}

/// Offline vision model with a fixed answer.
#[derive(Debug, Default)]
pub struct StubVlm {
    fail: bool,
    prompts: Mutex<Vec<String>>,
}

impl StubVlm {
    pub const CANNED: &'static str = "The image shows a statistical chart with two labeled axes, one colored mark per group, and a legend that maps colors to groups.";

    pub fn failing() -> Self {
        Self {
            fail: true,
            ..Self::default()
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

#[async_trait]
impl VlmProvider for StubVlm {
    async fn describe(&self, _image: &ChartImage, prompt: &str) -> Result<String, ProviderError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        if self.fail {
            return Err(ProviderError::Scripted("vision model unavailable".into()));
        }
        Ok(Self::CANNED.into())
    }
}

/// Visual-feature text for the prompt bundle; `None` when the vision model
/// fails, since the section is optional.
pub async fn fetch_visual_features(image: &ChartImage, provider: &dyn VlmProvider) -> Option<String> {
    match provider.describe(image, vlm_prompt()).await {
        Ok(text) if !text.trim().is_empty() => Some(text),
        Ok(_) => None,
        Err(e) => {
            tracing::warn!("visual features unavailable: {e}");
            None
        }
    }
}
