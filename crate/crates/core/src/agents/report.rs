use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::parse::{ask, parse_as, FinanceReply, ParseFailure};
use super::prompts::{notices, REPORT_QUERY, REPORT_SYSTEM, REPORT_USER};
use super::{AgentOutput, ChatMessage, Providers, Transcript};
use crate::error::{Error, Result};
use crate::retrieval::{chunk_report, rerank, retrieve_topk, Chunk, RankedChunk, RetrievalConfig};

/// One filing listed in `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportEntry {
    pub symbol: String,
    /// Date the filing became public; invisible to earlier days.
    pub date: NaiveDate,
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    symbol: String,
    date: NaiveDate,
    path: PathBuf,
}

/// Filings loaded from a directory holding `manifest.csv` with columns
/// `symbol,date,path` (paths relative to the directory).
#[derive(Debug, Clone, Default)]
pub struct ReportStore {
    entries: Vec<ReportEntry>,
}

impl ReportStore {
    pub fn new(mut entries: Vec<ReportEntry>) -> Self {
        entries.sort_by(|a, b| (a.date, &a.doc_id).cmp(&(b.date, &b.doc_id)));
        Self { entries }
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = dir.join("manifest.csv");
        let mut reader = csv::Reader::from_path(&manifest).map_err(|e| Error::data(&manifest, e.to_string()))?;
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
            let row = row.map_err(|e| Error::data(&manifest, format!("row {}: {e}", i + 1)))?;
            let path = dir.join(&row.path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            entries.push(ReportEntry {
                symbol: row.symbol,
                date: row.date,
                doc_id: row.path.to_string_lossy().into_owned(),
                text,
            });
        }
        Ok(Self::new(entries))
    }

    pub fn entries(&self) -> &[ReportEntry] {
        &self.entries
    }

    /// Most recent filing for `symbol` dated on or before `date`.
    pub fn latest_visible(&self, symbol: &str, date: NaiveDate) -> Option<&ReportEntry> {
        self.entries.iter().rev().find(|e| e.symbol == symbol && e.date <= date)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub value_text: String,
    pub citation_chunk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinanceSummary {
    pub doc_id: Option<String>,
    pub indicators: Vec<Indicator>,
    pub summary: String,
    /// Ordinals of the passages shown to the model.
    pub retrieved: Vec<usize>,
}

impl FinanceSummary {
    fn empty(summary: &str) -> Self {
        Self { doc_id: None, indicators: Vec::new(), summary: summary.to_string(), retrieved: Vec::new() }
    }

    /// Text block handed to downstream prompts.
    pub fn prompt_text(&self) -> String {
        let mut out = self.summary.clone();
        for ind in &self.indicators {
            out.push_str(&format!("\n- {}: {} [chunk {}]", ind.name, ind.value_text, ind.citation_chunk));
        }
        out
    }
}

fn accept_finance(text: &str, shown: &BTreeSet<usize>) -> std::result::Result<(Vec<Indicator>, String), ParseFailure> {
    let reply: FinanceReply = parse_as(text)?;
    let mut indicators = Vec::with_capacity(reply.indicators.len());
    for ind in reply.indicators {
        if !shown.contains(&ind.chunk) {
            return Err(ParseFailure(format!("indicator `{}` cites chunk {} which was not shown", ind.name, ind.chunk)));
        }
        let value_text = match ind.value {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        indicators.push(Indicator { name: ind.name, value_text, citation_chunk: ind.chunk });
    }
    Ok((indicators, reply.summary))
}

/// Summarizes the latest filing visible on `date`.
///
/// With `use_reranker` off, or when the reranker fails, passages keep their
/// hybrid order.
pub fn run_report_agent(
    date: NaiveDate,
    symbol: &str,
    reports: &ReportStore,
    cfg: &RetrievalConfig,
    providers: &Providers,
    use_reranker: bool,
) -> AgentOutput<FinanceSummary> {
    let mut flags = Vec::new();
    let Some(filing) = reports.latest_visible(symbol, date) else {
        flags.push("no filing visible".to_string());
        return AgentOutput {
            value: FinanceSummary::empty(&notices().no_filing),
            transcript: Transcript { flags, ..Transcript::default() },
        };
    };
    let unavailable = |mut flags: Vec<String>, why: String| {
        flags.push(why);
        AgentOutput {
            value: FinanceSummary { doc_id: Some(filing.doc_id.clone()), ..FinanceSummary::empty(&notices().filing_unavailable) },
            transcript: Transcript { flags, ..Transcript::default() },
        }
    };

    let chunks = match chunk_report(&filing.doc_id, &filing.text, cfg) {
        Ok(c) => c,
        Err(e) => return unavailable(flags, format!("filing could not be chunked: {e}")),
    };
    let query = REPORT_QUERY.trimmed();
    let candidates = match retrieve_topk(query, &chunks, providers.embed.as_ref(), cfg) {
        Ok(c) => c,
        Err(e) => return unavailable(flags, format!("retrieval failed: {e}")),
    };
    let passages: Vec<RankedChunk> = if use_reranker {
        rerank(query, &candidates, providers.rerank.as_ref(), cfg).unwrap_or_else(|f| {
            flags.push(format!("reranker failed, hybrid order used: {}", f.error));
            f.partial
        })
    } else {
        crate::retrieval::hybrid_only(&candidates, cfg)
    };
    let shown: BTreeSet<usize> = passages.iter().map(|p| p.chunk.ordinal).collect();
    let retrieved: Vec<usize> = passages.iter().map(|p| p.chunk.ordinal).collect();

    let system = REPORT_SYSTEM.render(&[("date", date.to_string()), ("symbol", symbol.to_string())]);
    let user = REPORT_USER.render(&[
        ("doc_id", filing.doc_id.clone()),
        ("period", filing.date.to_string()),
        ("passages", render_passages(passages.iter().map(|p| &p.chunk))),
    ]);
    let ex = ask(
        providers.chat.as_ref(),
        vec![ChatMessage::system(system), ChatMessage::user(user)],
        &providers.params,
        |text| accept_finance(text, &shown),
    );
    let mut transcript = ex.transcript;
    flags.append(&mut transcript.flags);
    transcript.flags = flags;
    let value = match ex.value {
        Some((indicators, summary)) => {
            FinanceSummary { doc_id: Some(filing.doc_id.clone()), indicators, summary, retrieved }
        }
        None => {
            transcript.flags.push("filing summary fallback".to_string());
            FinanceSummary {
                doc_id: Some(filing.doc_id.clone()),
                retrieved,
                ..FinanceSummary::empty(&notices().filing_unavailable)
            }
        }
    };
    AgentOutput { value, transcript }
}

fn render_passages<'a>(chunks: impl Iterator<Item = &'a Chunk>) -> String {
    chunks
        .map(|c| format!("[chunk {}] {}", c.ordinal, c.text))
        .collect::<Vec<_>>()
        .join("\n")
}
