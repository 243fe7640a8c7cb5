//! The five daily agents, their prompt plumbing and the reflection digests.
//!
//! Every agent call goes through [`parse::ask`]: one attempt, one repair
//! retry, then a fixed fallback. Provider trouble never escapes an agent;
//! it shows up as flags on the returned [`Transcript`].

pub mod chat;
mod decision;
mod forecast;
pub mod http;
mod news;
pub mod parse;
pub mod prompts;
mod reflection;
mod report;
pub mod stub;
mod style;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use chat::{ChatMessage, ChatParams, ChatProvider, ChatResponse, Role};
pub use decision::{run_decision_agent, Decision, DecisionInputs};
pub use forecast::{run_forecast_agent, Forecast, ForecastInputs};
pub use news::{run_news_agent, SentimentReport};
pub use parse::{parse_structured_output, ParseFailure};
pub use reflection::{
    build_reflection, Audience, HighlightedCase, Outcome, ReflectionEntry, ReflectionSummary,
    REFLECTION_WINDOW,
};
pub use report::{run_report_agent, FinanceSummary, Indicator, ReportEntry, ReportStore};
pub use style::{run_style_agent, StyleInputs, StyleOutcome, StylePreference};

use crate::retrieval::{EmbeddingProvider, RerankerProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentName {
    News,
    Report,
    Forecast,
    Style,
    Decision,
}

impl AgentName {
    /// Daily execution order.
    pub const ALL: [AgentName; 5] = [
        AgentName::News,
        AgentName::Report,
        AgentName::Forecast,
        AgentName::Style,
        AgentName::Decision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentName::News => "news",
            AgentName::Report => "report",
            AgentName::Forecast => "forecast",
            AgentName::Style => "style",
            AgentName::Decision => "decision",
        }
    }
}

impl std::fmt::Display for AgentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What was sent and received for one agent on one day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub input_text: String,
    pub output_text: String,
    pub reasoning_trace: String,
    pub flags: Vec<String>,
}

impl Transcript {
    pub fn flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Concatenates several exchanges (the per-item news calls) into one.
    pub fn merge(parts: Vec<Transcript>) -> Transcript {
        let join = |f: fn(&Transcript) -> &str| {
            parts
                .iter()
                .map(f)
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join("\n\n")
        };
        Transcript {
            input_text: join(|t| &t.input_text),
            output_text: join(|t| &t.output_text),
            reasoning_trace: join(|t| &t.reasoning_trace),
            flags: parts.iter().flat_map(|t| t.flags.iter().cloned()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentOutput<T> {
    pub value: T,
    pub transcript: Transcript,
}

/// Backends shared by all agents.
#[derive(Clone)]
pub struct Providers {
    pub chat: Arc<dyn ChatProvider>,
    pub embed: Arc<dyn EmbeddingProvider>,
    pub rerank: Arc<dyn RerankerProvider>,
    pub params: ChatParams,
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers").field("params", &self.params).finish_non_exhaustive()
    }
}

impl Providers {
    /// Stub chat policy with the hashing embedder and keyword reranker.
    pub fn stub(policy: &str, params: ChatParams) -> crate::Result<Self> {
        Ok(Self {
            chat: Arc::new(stub::StubChatProvider::from_policy(policy)?),
            embed: Arc::new(crate::retrieval::stub::HashEmbedder::default()),
            rerank: Arc::new(crate::retrieval::stub::KeywordReranker::financial()),
            params,
        })
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.4}")
}

pub(crate) fn fmt_opt_pct(pnl: Option<f64>) -> String {
    match pnl {
        Some(p) => format!("{:.2}%", p * 100.0),
        None => "n/a (no position)".to_string(),
    }
}
