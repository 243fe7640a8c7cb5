use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cosine, Chunk, EmbeddingProvider, RerankerProvider, RetrievalConfig, SparseVector};
use crate::error::{Error, ProviderError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub hybrid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChunk {
    pub chunk: Chunk,
    pub hybrid: f64,
    pub relevance: f64,
}

/// Reranker failure; `partial` keeps the hybrid order truncated to `rerank_top_k`.
#[derive(Debug, Clone)]
pub struct RerankFailure {
    pub error: ProviderError,
    pub partial: Vec<RankedChunk>,
}

struct QueryVectors {
    dense: Vec<f64>,
    sparse: SparseVector,
}

fn embed(provider: &dyn EmbeddingProvider, text: &str) -> Result<QueryVectors, ProviderError> {
    Ok(QueryVectors {
        dense: provider.dense(text)?,
        sparse: provider.sparse(text)?,
    })
}

fn combine(q: &QueryVectors, d: &QueryVectors, cfg: &RetrievalConfig) -> f64 {
    cfg.w_dense * cosine(&q.dense, &d.dense) + cfg.w_sparse * q.sparse.dot(&d.sparse)
}

/// Weighted sum of dense cosine and sparse inner product.
pub fn hybrid_score(
    query: &str,
    chunk: &Chunk,
    provider: &dyn EmbeddingProvider,
    cfg: &RetrievalConfig,
) -> Result<f64, ProviderError> {
    let q = embed(provider, query)?;
    let d = embed(provider, &chunk.text)?;
    Ok(combine(&q, &d, cfg))
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

pub fn retrieve_topk(
    query: &str,
    chunks: &[Chunk],
    provider: &dyn EmbeddingProvider,
    cfg: &RetrievalConfig,
) -> Result<Vec<ScoredChunk>> {
    if chunks.is_empty() {
        return Err(Error::invalid("no chunks to retrieve from"));
    }
    let q = embed(provider, query)?;
    let mut scored = chunks
        .par_iter()
        .map(|c| {
            let d = embed(provider, &c.text)?;
            Ok(ScoredChunk {
                chunk: c.clone(),
                hybrid: combine(&q, &d, cfg),
            })
        })
        .collect::<Result<Vec<_>, ProviderError>>()?;
    scored.sort_by(|a, b| desc(a.hybrid, b.hybrid).then(a.chunk.ordinal.cmp(&b.chunk.ordinal)));
    scored.truncate(cfg.hybrid_top_k);
    Ok(scored)
}

pub fn rerank(
    query: &str,
    candidates: &[ScoredChunk],
    reranker: &dyn RerankerProvider,
    cfg: &RetrievalConfig,
) -> Result<Vec<RankedChunk>, RerankFailure> {
    let scores: Result<Vec<f64>, ProviderError> = candidates
        .par_iter()
        .map(|c| reranker.relevance(query, &c.chunk.text))
        .collect();
    match scores {
        Ok(scores) => {
            let mut ranked: Vec<RankedChunk> = candidates
                .iter()
                .zip(scores)
                .map(|(c, relevance)| RankedChunk {
                    chunk: c.chunk.clone(),
                    hybrid: c.hybrid,
                    relevance,
                })
                .collect();
            ranked.sort_by(|a, b| {
                desc(a.relevance, b.relevance)
                    .then(desc(a.hybrid, b.hybrid))
                    .then(a.chunk.ordinal.cmp(&b.chunk.ordinal))
            });
            ranked.truncate(cfg.rerank_top_k);
            Ok(ranked)
        }
        Err(error) => Err(RerankFailure {
            error,
            partial: hybrid_only(candidates, cfg),
        }),
    }
}

/// Hybrid order truncated to `rerank_top_k`, relevance left at 0.
pub(crate) fn hybrid_only(candidates: &[ScoredChunk], cfg: &RetrievalConfig) -> Vec<RankedChunk> {
    candidates
        .iter()
        .take(cfg.rerank_top_k)
        .map(|c| RankedChunk {
            chunk: c.chunk.clone(),
            hybrid: c.hybrid,
            relevance: 0.0,
        })
        .collect()
}
