//! Chat-completion clients: an offline mock, replay from a fixture file, and
//! a live HTTP client, all behind [`ChatProvider`]. [`ProviderHandle`] adds
//! retries, rate limiting and the call budget.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::limits::{CallBudget, RetryPolicy, TokenBucket};
use super::sample::TaskKind;
use super::transport::HttpTransport;
use crate::extraction::Expected;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStage {
    Generation,
    Verification,
}

/// Local bookkeeping carried with a request; never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMeta {
    /// Stable identity of the call, used by replay fixtures and caches.
    pub key: String,
    pub task: TaskKind,
    pub stage: RequestStage,
    /// The answer the call is meant to lead to. Only mocks read it.
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub meta: RequestMeta,
}

impl ChatRequest {
    pub fn wire_body(&self) -> serde_json::Value {
        json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }

    pub fn prompt(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub model_id: String,
    /// Unix seconds reported by the provider.
    pub created: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider returned HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("{0}")]
    Transport(String),
    #[error("malformed provider reply: {0}")]
    Malformed(String),
    #[error("call budget of {cap} exhausted")]
    BudgetExceeded { cap: u64 },
    #[error("no recorded reply for key '{0}'")]
    ReplayMiss(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("{0}")]
    Fixture(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Status { code, .. } => *code == 429 || *code >= 500,
            ProviderError::Transport(_) | ProviderError::Malformed(_) => true,
            _ => false,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    /// Calls that reached this provider.
    fn calls(&self) -> usize;
}

type Responder = dyn Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync;

pub struct MockProvider {
    model_id: String,
    responder: Box<Responder>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(
        model_id: impl Into<String>,
        responder: impl Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> MockProvider {
        MockProvider {
            model_id: model_id.into(),
            responder: Box::new(responder),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always answers with the request's reference: a grounded, well-formed
    /// trace when generating, a bare tagged answer when verifying.
    pub fn oracle(model_id: impl Into<String>) -> MockProvider {
        MockProvider::new(model_id, |req| {
            let reference = req.meta.reference.as_deref().unwrap_or("");
            Ok(match req.meta.stage {
                RequestStage::Generation => oracle_generation(req.meta.task, reference),
                RequestStage::Verification => {
                    format!("<answer>{}</answer>", tagged(req.meta.task, reference))
                }
            })
        })
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(ChatResponse {
            content: (self.responder)(request)?,
            model_id: self.model_id.clone(),
            created: Some(0),
        })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn tagged(task: TaskKind, value: &str) -> String {
    match task.expected() {
        Expected::Smiles => format!("<SMILES>{value}</SMILES>"),
        Expected::Iupac => format!("<IUPAC>{value}</IUPAC>"),
    }
}

const ORACLE_REASONING: &str = "\
Looking at the image, I see the structure laid out clearly. I start by \
analyzing the ring systems and chains, then check each heteroatom and the \
bonds that connect it, noting charges and any stereo marks drawn as wedges \
or hashes. Next I trace how the fragments join, confirming every valence \
is satisfied and that no atom is counted twice. With the connectivity \
settled I write the result in the requested notation and read it back \
against the picture once more to make sure nothing was dropped.";

/// Trace (or caption) a perfect generator would produce for `reference`.
pub fn oracle_generation(task: TaskKind, reference: &str) -> String {
    if task == TaskKind::Caption {
        return format!(
            "The image depicts a molecule drawn as a skeletal structure. {ORACLE_REASONING} \
             In short, it is the compound written {reference}."
        );
    }
    format!(
        "<think>\n{ORACLE_REASONING}\n</think>\n<answer>{}</answer>",
        tagged(task, reference)
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayEntry {
    pub key: String,
    pub content: String,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub created: Option<u64>,
}

/// Serves recorded replies by request key.
pub struct ReplayProvider {
    entries: HashMap<String, ReplayEntry>,
    default_model: String,
    calls: AtomicUsize,
}

impl ReplayProvider {
    pub fn new(entries: Vec<ReplayEntry>, default_model: impl Into<String>) -> ReplayProvider {
        ReplayProvider {
            entries: entries.into_iter().map(|e| (e.key.clone(), e)).collect(),
            default_model: default_model.into(),
            calls: AtomicUsize::new(0),
        }
    }

    /// One [`ReplayEntry`] per line; later lines override earlier ones.
    pub fn from_file(path: &Path, default_model: impl Into<String>) -> Result<ReplayProvider, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line).map_err(|e| {
                ProviderError::Fixture(format!("{} line {}: {e}", path.display(), k + 1))
            })?);
        }
        Ok(ReplayProvider::new(entries, default_model))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let e = self
            .entries
            .get(&request.meta.key)
            .ok_or_else(|| ProviderError::ReplayMiss(request.meta.key.clone()))?;
        Ok(ChatResponse {
            content: e.content.clone(),
            model_id: e.model_id.clone().unwrap_or_else(|| self.default_model.clone()),
            created: e.created,
        })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// OpenAI-style `POST {base}/chat/completions`.
pub struct HttpProvider {
    base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
    calls: AtomicUsize,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, transport: Arc<dyn HttpTransport>) -> HttpProvider {
        HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            transport,
            calls: AtomicUsize::new(0),
        }
    }
}

fn parse_completion(body: &str) -> Result<ChatResponse, ProviderError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?;
    Ok(ChatResponse {
        content: content.to_string(),
        model_id: v.get("model").and_then(|m| m.as_str()).unwrap_or("").to_string(),
        created: v.get("created").and_then(|c| c.as_u64()),
    })
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(key) = &self.api_key {
            headers.push(("Authorization".into(), format!("Bearer {key}")));
        }
        let url = format!("{}/chat/completions", self.base_url);
        let reply = self
            .transport
            .post_json(&url, &headers, &request.wire_body())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&reply.status) {
            return Err(ProviderError::Status {
                code: reply.status,
                body: reply.body.chars().take(300).collect(),
            });
        }
        let mut resp = parse_completion(&reply.body)?;
        if resp.model_id.is_empty() {
            resp.model_id = request.model.clone();
        }
        Ok(resp)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// A provider together with the call policy applied to it.
pub struct ProviderHandle {
    pub provider: Arc<dyn ChatProvider>,
    pub retry: RetryPolicy,
    pub bucket: Option<Arc<TokenBucket>>,
    pub budget: Arc<CallBudget>,
}

impl ProviderHandle {
    pub fn new(provider: Arc<dyn ChatProvider>) -> ProviderHandle {
        ProviderHandle {
            provider,
            retry: RetryPolicy::default(),
            bucket: None,
            budget: Arc::new(CallBudget::new(None)),
        }
    }

    /// Sends `request`, retrying transient failures. Every attempt counts
    /// against the budget. Returns the reply and the attempts used.
    pub fn call(&self, request: &ChatRequest) -> (Result<ChatResponse, ProviderError>, u32) {
        self.retry.run(
            |_| {
                if !self.budget.try_take() {
                    return Err(ProviderError::BudgetExceeded {
                        cap: self.budget.cap().unwrap_or(0),
                    });
                }
                if let Some(b) = &self.bucket {
                    b.acquire();
                }
                self.provider.complete(request)
            },
            ProviderError::is_retryable,
        )
    }
}
