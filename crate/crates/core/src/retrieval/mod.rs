//! News influence scoring, deduplication, filing chunking and hybrid
//! dense + sparse retrieval with reranking.
//!
//! Embedding and reranking backends sit behind [`EmbeddingProvider`] and
//! [`RerankerProvider`]; [`stub`] ships hermetic deterministic versions.

mod chunking;
mod hybrid;
mod news;
pub mod stub;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use chunking::{chunk_report, split_sentences, Chunk};
pub(crate) use hybrid::hybrid_only;
pub use hybrid::{hybrid_score, rerank, retrieve_topk, RankedChunk, RerankFailure, ScoredChunk};
pub use news::{
    base_importance, dedupe, dedupe_exact, influence_score, load_news_jsonl, score_news,
    KeywordTable, NewsItem, ScoredNews,
};

use crate::error::{Error, ProviderError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub w_dense: f64,
    pub w_sparse: f64,
    pub hybrid_top_k: usize,
    pub rerank_top_k: usize,
    pub dedup_cosine: f64,
    pub window_sentences: usize,
    pub stride_sentences: usize,
    pub news_top_k: usize,
    /// Keyword table for news importance; the bundled table when unset.
    pub keywords_path: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            w_dense: 1.0,
            w_sparse: 0.8,
            hybrid_top_k: 10,
            rerank_top_k: 6,
            dedup_cosine: 0.92,
            window_sentences: 5,
            stride_sentences: 2,
            news_top_k: 10,
            keywords_path: None,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_dense < 0.0 || self.w_sparse < 0.0 {
            return Err(Error::Config("retrieval weights must be non-negative".into()));
        }
        if self.hybrid_top_k == 0 || self.rerank_top_k == 0 || self.news_top_k == 0 {
            return Err(Error::Config("retrieval top-k values must be at least 1".into()));
        }
        if !(self.dedup_cosine > 0.0 && self.dedup_cosine <= 1.0) {
            return Err(Error::Config("retrieval.dedup_cosine must lie in (0,1]".into()));
        }
        if self.window_sentences == 0
            || self.stride_sentences == 0
            || self.stride_sentences > self.window_sentences
        {
            return Err(Error::Config(
                "retrieval windows need 1 <= stride_sentences <= window_sentences".into(),
            ));
        }
        Ok(())
    }
}

/// Non-negative weighted-term vector keyed by hashed term id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector(pub BTreeMap<u32, f64>);

impl SparseVector {
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (&self.0, &other.0)
        } else {
            (&other.0, &self.0)
        };
        small
            .iter()
            .filter_map(|(k, v)| large.get(k).map(|w| v * w))
            .sum()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// L2-normalized dense embedding.
    fn dense(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
    fn sparse(&self, text: &str) -> Result<SparseVector, ProviderError>;
}

pub trait RerankerProvider: Send + Sync {
    /// Probability in [0,1] that `passage` answers `query`.
    fn relevance(&self, query: &str, passage: &str) -> Result<f64, ProviderError>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
