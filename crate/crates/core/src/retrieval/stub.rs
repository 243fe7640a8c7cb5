//! Deterministic, hermetic embedding and reranking providers.

use std::collections::BTreeMap;

use super::{tokenize, EmbeddingProvider, RerankerProvider, SparseVector};
use crate::error::ProviderError;

pub const STUB_DENSE_DIM: usize = 64;
const SPARSE_BUCKETS: u64 = 1 << 20;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Feature-hashed bag of words (dense) and relative term frequency (sparse).
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: STUB_DENSE_DIM }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dense(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            v[(fnv1a(token.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }

    fn sparse(&self, text: &str) -> Result<SparseVector, ProviderError> {
        let tokens = tokenize(text);
        let mut map = BTreeMap::new();
        if tokens.is_empty() {
            return Ok(SparseVector(map));
        }
        let unit = 1.0 / tokens.len() as f64;
        for token in &tokens {
            let id = (fnv1a(token.as_bytes()) % SPARSE_BUCKETS) as u32;
            *map.entry(id).or_insert(0.0) += unit;
        }
        Ok(SparseVector(map))
    }
}

/// Relevance 1 when the passage contains any trigger phrase, else 0.
#[derive(Debug, Clone)]
pub struct KeywordReranker {
    triggers: Vec<String>,
}

impl KeywordReranker {
    pub fn new<I, S>(triggers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            triggers: triggers
                .into_iter()
                .map(|t| t.as_ref().to_lowercase())
                .collect(),
        }
    }

    /// Price-related financial vocabulary.
    pub fn financial() -> Self {
        Self::new([
            "revenue", "earnings", "guidance", "margin", "profit", "eps", "cash flow", "outlook",
            "net income", "sales",
        ])
    }
}

impl RerankerProvider for KeywordReranker {
    fn relevance(&self, _query: &str, passage: &str) -> Result<f64, ProviderError> {
        let hay = passage.to_lowercase();
        Ok(if self.triggers.iter().any(|t| hay.contains(t.as_str())) {
            1.0
        } else {
            0.0
        })
    }
}
