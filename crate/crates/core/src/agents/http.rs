//! JSON-over-HTTP providers. One POST per call, no retries here; the agent
//! layer owns retry and fallback.
//!
//! Chat: `{model, messages, temperature, seed, max_tokens}` →
//! `{content, reasoning_trace?}`.
//! Embedding: `{model, input}` → `{dense: [f64], sparse: {"<id>": f64}}`.
//! Reranker: `{model, query, passage}` → `{probability}` or `{answer: "yes"|"no"}`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::chat::{ChatMessage, ChatParams, ChatProvider, ChatResponse};
use crate::error::ProviderError;
use crate::retrieval::{EmbeddingProvider, RerankerProvider, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub url: String,
    pub model: String,
}

#[derive(Debug, Clone)]
struct Client {
    http: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl Client {
    fn new(api_key: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self { http, api_key })
    }

    fn post<T: DeserializeOwned>(&self, url: &str, body: &serde_json::Value) -> Result<T, ProviderError> {
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::Refused(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(ProviderError::BadResponse(format!("{status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(format!("{e}: {text}")))
    }
}

/// Reads the API key from the named environment variable; `None` sends no
/// Authorization header.
pub fn api_key_from_env(var: Option<&str>) -> Result<Option<String>, ProviderError> {
    match var {
        None => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| ProviderError::Config(format!("environment variable {name} is not set"))),
    }
}

#[derive(Debug, Clone)]
pub struct HttpChatProvider {
    client: Client,
    endpoint: Endpoint,
}

impl HttpChatProvider {
    pub fn new(endpoint: Endpoint, api_key: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
        Ok(Self { client: Client::new(api_key, timeout)?, endpoint })
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<ChatResponse, ProviderError> {
        let body = json!({
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": params.temperature,
            "seed": params.seed,
            "max_tokens": params.max_tokens,
        });
        self.client.post(&self.endpoint.url, &body)
    }
}

#[derive(Debug, Deserialize)]
struct EmbeddingReply {
    #[serde(default)]
    dense: Vec<f64>,
    #[serde(default)]
    sparse: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    client: Client,
    endpoint: Endpoint,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: Endpoint, api_key: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
        Ok(Self { client: Client::new(api_key, timeout)?, endpoint })
    }

    fn fetch(&self, text: &str) -> Result<EmbeddingReply, ProviderError> {
        self.client.post(&self.endpoint.url, &json!({"model": self.endpoint.model, "input": text}))
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn dense(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let reply = self.fetch(text)?;
        if reply.dense.is_empty() {
            return Err(ProviderError::BadResponse("empty dense vector".into()));
        }
        Ok(reply.dense)
    }

    fn sparse(&self, text: &str) -> Result<SparseVector, ProviderError> {
        let mut out = BTreeMap::new();
        for (k, v) in self.fetch(text)?.sparse {
            let id = k.parse::<u32>().map_err(|_| ProviderError::BadResponse(format!("sparse key `{k}` is not an integer")))?;
            out.insert(id, v);
        }
        Ok(SparseVector(out))
    }
}

#[derive(Debug, Deserialize)]
struct ScoreReply {
    probability: Option<f64>,
    answer: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HttpRerankerProvider {
    client: Client,
    endpoint: Endpoint,
}

impl HttpRerankerProvider {
    pub fn new(endpoint: Endpoint, api_key: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
        Ok(Self { client: Client::new(api_key, timeout)?, endpoint })
    }
}

impl RerankerProvider for HttpRerankerProvider {
    fn relevance(&self, query: &str, passage: &str) -> Result<f64, ProviderError> {
        let reply: ScoreReply = self
            .client
            .post(&self.endpoint.url, &json!({"model": self.endpoint.model, "query": query, "passage": passage}))?;
        match (reply.probability, reply.answer.as_deref().map(str::trim).map(str::to_ascii_lowercase)) {
            (Some(p), _) if (0.0..=1.0).contains(&p) => Ok(p),
            (Some(p), _) => Err(ProviderError::BadResponse(format!("probability {p} outside [0, 1]"))),
            (None, Some(a)) if a == "yes" => Ok(1.0),
            (None, Some(a)) if a == "no" => Ok(0.0),
            _ => Err(ProviderError::BadResponse("reply has neither probability nor yes/no answer".into())),
        }
    }
}
