use serde::{Deserialize, Serialize};

use super::RetrievalConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    /// Half-open sentence range `[start, end)`.
    pub sentence_span: (usize, usize),
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
pub fn split_sentences(doc: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = doc.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                let s = doc[start..end].trim();
                if !s.is_empty() {
                    sentences.push(s.split_whitespace().collect::<Vec<_>>().join(" "));
                }
                start = end;
            }
        }
    }
    let tail = doc[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    sentences
}

/// Sliding windows of `window_sentences` advancing by `stride_sentences`.
pub fn chunk_report(doc_id: &str, doc: &str, cfg: &RetrievalConfig) -> Result<Vec<Chunk>> {
    let sentences = split_sentences(doc);
    if sentences.is_empty() {
        return Err(Error::invalid(format!("document `{doc_id}` is empty")));
    }
    let n = sentences.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + cfg.window_sentences).min(n);
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            ordinal: chunks.len(),
            text: sentences[start..end].join(" "),
            sentence_span: (start, end),
        });
        if end == n {
            break;
        }
        start += cfg.stride_sentences;
    }
    Ok(chunks)
}
