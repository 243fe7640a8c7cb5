use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cosine, tokenize, EmbeddingProvider, RerankerProvider, RetrievalConfig};
use crate::error::{Error, ProviderError, Result};

const DEFAULT_KEYWORDS: &str = include_str!("../../assets/keywords.toml");
const KEYWORD_SHARE: f64 = 0.7;
const LENGTH_SHARE: f64 = 0.3;
const LENGTH_SATURATION_WORDS: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewsItem {
    pub date: NaiveDate,
    pub title: String,
    pub body: String,
}

impl NewsItem {
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNews {
    pub item: NewsItem,
    pub base: f64,
    pub prob: f64,
    pub influence: f64,
}

/// Line-delimited `{date, title, body}` records, sorted by date on load.
pub fn load_news_jsonl(path: impl AsRef<Path>) -> Result<Vec<NewsItem>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: NewsItem = serde_json::from_str(line)
            .map_err(|e| Error::data(path, format!("line {}: {e}", i + 1)))?;
        if item.title.trim().is_empty() {
            return Err(Error::data(path, format!("line {}: empty title", i + 1)));
        }
        items.push(item);
    }
    items.sort_by_key(|n| n.date);
    Ok(items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTable {
    /// Normalized (space-joined lowercase tokens) term with its weight.
    terms: Vec<(String, f64)>,
}

impl Default for KeywordTable {
    fn default() -> Self {
        Self::parse(DEFAULT_KEYWORDS).expect("bundled keyword table parses")
    }
}

impl KeywordTable {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        Self {
            terms: terms
                .into_iter()
                .map(|(t, w)| (tokenize(t.as_ref()).join(" "), w))
                .filter(|(t, _)| !t.is_empty())
                .collect(),
        }
    }

    /// `term = weight` pairs in TOML syntax.
    pub fn parse(text: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> =
            toml::from_str(text).map_err(|e| Error::Config(format!("keyword table: {e}")))?;
        if let Some((term, w)) = map.iter().find(|(_, w)| !(**w >= 0.0)) {
            return Err(Error::Config(format!("keyword `{term}` has negative weight {w}")));
        }
        Ok(Self::new(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sum of weights of distinct terms present, capped at 1.
    pub fn hit_score(&self, text: &str) -> f64 {
        let haystack = format!(" {} ", tokenize(text).join(" "));
        let total: f64 = self
            .terms
            .iter()
            .filter(|(t, _)| haystack.contains(&format!(" {t} ")))
            .map(|(_, w)| w)
            .sum();
        total.min(1.0)
    }
}

/// Rule-based importance from keyword hits and body length, in [0,1].
pub fn base_importance(item: &NewsItem, keywords: &KeywordTable) -> f64 {
    let hits = keywords.hit_score(&item.text());
    let words = item.body.split_whitespace().count() as f64;
    let length = (words / LENGTH_SATURATION_WORDS).min(1.0);
    (KEYWORD_SHARE * hits + LENGTH_SHARE * length).clamp(0.0, 1.0)
}

pub fn influence_score(base: f64, prob: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&base) || !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!(
            "influence inputs must lie in [0,1]: base={base}, prob={prob}"
        )));
    }
    Ok(0.55 * base + 0.25 * prob + 0.20)
}

/// Scores each item; items whose reranker call fails come back as errors in place.
pub fn score_news(
    items: &[NewsItem],
    keywords: &KeywordTable,
    reranker: &dyn RerankerProvider,
    impact_query: &str,
) -> Vec<Result<ScoredNews, ProviderError>> {
    items
        .par_iter()
        .map(|item| {
            let base = base_importance(item, keywords);
            let prob = reranker.relevance(impact_query, &item.text())?.clamp(0.0, 1.0);
            Ok(ScoredNews {
                item: item.clone(),
                base,
                prob,
                influence: influence_score(base, prob).expect("inputs clamped"),
            })
        })
        .collect()
}

/// Greedy scan keeping an item iff its dense cosine to every kept item is
/// below `dedup_cosine`. Input order is preserved.
pub fn dedupe(
    items: &[ScoredNews],
    provider: &dyn EmbeddingProvider,
    cfg: &RetrievalConfig,
) -> Result<Vec<ScoredNews>, ProviderError> {
    let vectors = items
        .par_iter()
        .map(|n| provider.dense(&n.item.text()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut kept: Vec<usize> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        if kept.iter().all(|&k| cosine(&vectors[k], v) < cfg.dedup_cosine) {
            kept.push(i);
        }
    }
    Ok(kept.into_iter().map(|i| items[i].clone()).collect())
}

/// Drops items whose title and body exactly repeat an earlier item.
pub fn dedupe_exact(items: &[ScoredNews]) -> Vec<ScoredNews> {
    let mut out: Vec<ScoredNews> = Vec::new();
    for n in items {
        if !out.iter().any(|k| k.item.title == n.item.title && k.item.body == n.item.body) {
            out.push(n.clone());
        }
    }
    out
}
