use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agents::http::{api_key_from_env, Endpoint, HttpChatProvider, HttpEmbeddingProvider, HttpRerankerProvider};
use crate::agents::{ChatParams, Providers};
use crate::datasynth::{BandConfig, RewardConfig, SftFilter};
use crate::error::{Error, Result};
use crate::gate::GateConfig;
use crate::retrieval::stub::{HashEmbedder, KeywordReranker};
use crate::retrieval::{KeywordTable, RetrievalConfig};
use crate::risk::RiskConfig;

/// Ablation switches. All on is the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Features {
    /// Stop-loss / take-profit overrides.
    pub risk_management: bool,
    /// Experience summaries in forecast, style and decision prompts.
    pub self_reflection: bool,
    /// Reranking of filing passages and embedding-based news dedup.
    pub rerank_embedding: bool,
    /// Style agent; off pins the style to balanced.
    pub style_and_state: bool,
}

impl Default for Features {
    fn default() -> Self {
        Self { risk_management: true, self_reflection: true, rerank_embedding: true, style_and_state: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSection {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatSection {
    fn default() -> Self {
        let p = ChatParams::default();
        Self { temperature: p.temperature, max_tokens: p.max_tokens }
    }
}

/// Endpoints used when `provider = "http"`. Missing embedding or reranker
/// endpoints fall back to the local hashing embedder and keyword reranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    pub chat: Option<Endpoint>,
    pub embed: Option<Endpoint>,
    pub rerank: Option<Endpoint>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for HttpSection {
    fn default() -> Self {
        Self { chat: None, embed: None, rerank: None, api_key_env: None, timeout_secs: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    pub symbol: String,
    /// First trading day; defaults to the first day after the warm-up.
    #[serde(default)]
    pub start: Option<NaiveDate>,
    /// Last trading day; defaults to the last price bar.
    #[serde(default)]
    pub end: Option<NaiveDate>,
    #[serde(default = "default_cash")]
    pub initial_cash: f64,
    #[serde(default = "default_commission")]
    pub commission_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// `stub:<policy>` or `http`.
    pub provider: String,
    #[serde(default)]
    pub features: Features,
    #[serde(default)]
    pub chat: ChatSection,
    #[serde(default)]
    pub http: HttpSection,
    #[serde(default)]
    pub gate: GateConfig,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub sft: SftFilter,
}

fn default_cash() -> f64 {
    100_000.0
}

fn default_commission() -> f64 {
    0.001
}

impl BacktestConfig {
    /// Minimal config for `symbol` with the given provider; everything else default.
    pub fn new(symbol: &str, provider: &str) -> Self {
        Self {
            symbol: symbol.to_string(),
            start: None,
            end: None,
            initial_cash: default_cash(),
            commission_rate: default_commission(),
            seed: 0,
            provider: provider.to_string(),
            features: Features::default(),
            chat: ChatSection::default(),
            http: HttpSection::default(),
            gate: GateConfig::default(),
            risk: RiskConfig::default(),
            retrieval: RetrievalConfig::default(),
            band: BandConfig::default(),
            reward: RewardConfig::default(),
            sft: SftFilter::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.symbol.trim().is_empty() {
            return Err(Error::Config("symbol must not be empty".into()));
        }
        if !(self.initial_cash > 0.0) || !self.initial_cash.is_finite() {
            return Err(Error::Config("initial_cash must be positive".into()));
        }
        if !(self.commission_rate >= 0.0) || self.commission_rate >= 1.0 {
            return Err(Error::Config("commission_rate must lie in [0, 1)".into()));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::Config(format!("empty date range {s}..{e}")));
            }
        }
        if !(self.sft.whit_min >= 0.0) {
            return Err(Error::Config("sft.whit_min must be non-negative".into()));
        }
        match self.provider.as_str() {
            p if p.starts_with("stub:") => {}
            "http" if self.http.chat.is_some() => {}
            "http" => return Err(Error::Config("provider = \"http\" needs an [http.chat] endpoint".into())),
            other => return Err(Error::Config(format!("unknown provider `{other}`"))),
        }
        self.gate.validate()?;
        self.risk.validate()?;
        self.retrieval.validate()?;
        self.band.validate()?;
        self.reward.validate()
    }

    pub fn chat_params(&self) -> ChatParams {
        ChatParams { temperature: self.chat.temperature, seed: self.seed, max_tokens: self.chat.max_tokens }
    }

    pub fn keywords(&self) -> Result<KeywordTable> {
        match &self.retrieval.keywords_path {
            Some(p) => KeywordTable::load(p),
            None => Ok(KeywordTable::default()),
        }
    }

    /// Instantiates the configured backends.
    pub fn providers(&self) -> Result<Providers> {
        let params = self.chat_params();
        if let Some(policy) = self.provider.strip_prefix("stub:") {
            return Providers::stub(policy, params);
        }
        let key = api_key_from_env(self.http.api_key_env.as_deref())?;
        let timeout = Duration::from_secs(self.http.timeout_secs);
        let chat = self.http.chat.clone().ok_or_else(|| Error::Config("missing [http.chat]".into()))?;
        Ok(Providers {
            chat: Arc::new(HttpChatProvider::new(chat, key.clone(), timeout)?),
            embed: match &self.http.embed {
                Some(e) => Arc::new(HttpEmbeddingProvider::new(e.clone(), key.clone(), timeout)?),
                None => Arc::new(HashEmbedder::default()),
            },
            rerank: match &self.http.rerank {
                Some(e) => Arc::new(HttpRerankerProvider::new(e.clone(), key, timeout)?),
                None => Arc::new(KeywordReranker::financial()),
            },
            params,
        })
    }
}
