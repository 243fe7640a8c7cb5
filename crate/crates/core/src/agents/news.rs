use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parse::{ask, parse_as, ParseFailure, SentimentReply};
use super::prompts::{notices, NEWS_IMPACT_QUERY, NEWS_SYSTEM, NEWS_USER};
use super::{fmt_num, AgentOutput, ChatMessage, Providers, Transcript};
use crate::retrieval::{dedupe, dedupe_exact, score_news, KeywordTable, NewsItem, RetrievalConfig, ScoredNews};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentReport {
    pub score: f64,
    pub summary: String,
    pub items_used: usize,
    pub items_failed: usize,
}

fn accept_sentiment(text: &str) -> Result<SentimentReply, ParseFailure> {
    let reply: SentimentReply = parse_as(text)?;
    if !(-1.0..=1.0).contains(&reply.sentiment) {
        return Err(ParseFailure(format!("sentiment {} outside [-1, 1]", reply.sentiment)));
    }
    Ok(reply)
}

/// Scores, deduplicates and selects the day's news, asks for one sentiment
/// per surviving item, and averages them weighted by influence.
///
/// `embedding_dedup` off falls back to exact-duplicate matching. Items whose
/// scoring or sentiment call fails are skipped and counted.
pub fn run_news_agent(
    date: NaiveDate,
    symbol: &str,
    news: &[NewsItem],
    keywords: &KeywordTable,
    cfg: &RetrievalConfig,
    providers: &Providers,
    embedding_dedup: bool,
) -> AgentOutput<SentimentReport> {
    let mut flags = Vec::new();
    let mut failed = 0;
    let mut scored: Vec<ScoredNews> = Vec::new();
    for r in score_news(news, keywords, providers.rerank.as_ref(), NEWS_IMPACT_QUERY.trimmed()) {
        match r {
            Ok(s) => scored.push(s),
            Err(e) => {
                failed += 1;
                flags.push(format!("news scoring failed: {e}"));
            }
        }
    }
    // stable: equal influence keeps input order
    scored.sort_by(|a, b| b.influence.total_cmp(&a.influence));
    let unique = if embedding_dedup {
        dedupe(&scored, providers.embed.as_ref(), cfg).unwrap_or_else(|e| {
            flags.push(format!("embedding dedup failed, exact matching used: {e}"));
            dedupe_exact(&scored)
        })
    } else {
        dedupe_exact(&scored)
    };
    let selected: Vec<ScoredNews> = unique.into_iter().take(cfg.news_top_k).collect();

    if selected.is_empty() {
        let summary = if failed == 0 { notices().no_news.clone() } else { "No news item could be scored.".to_string() };
        return AgentOutput {
            value: SentimentReport { score: 0.0, summary, items_used: 0, items_failed: failed },
            transcript: Transcript { flags, ..Transcript::default() },
        };
    }

    let system = NEWS_SYSTEM.render(&[("date", date.to_string()), ("symbol", symbol.to_string())]);
    let exchanges: Vec<_> = selected
        .par_iter()
        .map(|n| {
            let user = NEWS_USER.render(&[
                ("date", n.item.date.to_string()),
                ("influence", fmt_num(n.influence)),
                ("title", n.item.title.clone()),
                ("body", n.item.body.clone()),
            ]);
            ask(
                providers.chat.as_ref(),
                vec![ChatMessage::system(system.clone()), ChatMessage::user(user)],
                &providers.params,
                accept_sentiment,
            )
        })
        .collect();

    let mut weighted = 0.0;
    let mut weight = 0.0;
    let mut lines = Vec::new();
    let mut used = 0;
    let mut parts = Vec::new();
    for (n, ex) in selected.iter().zip(exchanges) {
        match &ex.value {
            Some(reply) => {
                used += 1;
                weighted += n.influence * reply.sentiment;
                weight += n.influence;
                lines.push(format!("- {} [{:+.2}]: {}", n.item.title, reply.sentiment, reply.summary));
            }
            None => failed += 1,
        }
        parts.push(ex.transcript);
    }
    let mut transcript = Transcript::merge(parts);
    flags.append(&mut transcript.flags);
    transcript.flags = flags;

    let (score, summary) = if used == 0 {
        (0.0, "Sentiment analysis unavailable for today's news.".to_string())
    } else {
        ((weighted / weight).clamp(-1.0, 1.0), lines.join("\n"))
    };
    AgentOutput {
        value: SentimentReport { score, summary, items_used: used, items_failed: failed },
        transcript,
    }
}
