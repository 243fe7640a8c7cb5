//! Extraction of JSON objects from free-form model output, and the
//! ask / repair / fallback loop every agent goes through.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use super::chat::{render_transcript, ChatMessage, ChatParams, ChatProvider};
use super::prompts::REPAIR;
use super::Transcript;
use crate::error::ProviderError;
use crate::portfolio::TradeKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ParseFailure(pub String);

/// First well-formed brace-delimited JSON object in `text`.
pub fn parse_structured_output(text: &str) -> Result<Map<String, Value>, ParseFailure> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Ok(map);
        }
    }
    Err(ParseFailure("no JSON object found in reply".to_string()))
}

/// Parses the first object into a typed schema.
pub fn parse_as<T: DeserializeOwned>(text: &str) -> Result<T, ParseFailure> {
    let map = parse_structured_output(text)?;
    serde_json::from_value(Value::Object(map)).map_err(|e| ParseFailure(e.to_string()))
}

#[derive(Debug, Clone, Deserialize)]
pub struct DecisionReply {
    pub action: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ForecastReply {
    pub up: f64,
    pub down: f64,
    pub sideways: f64,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StyleReply {
    pub style: String,
    pub confidence: f64,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SentimentReply {
    pub sentiment: f64,
    #[serde(default)]
    pub summary: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IndicatorReply {
    pub name: String,
    pub value: Value,
    pub chunk: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FinanceReply {
    #[serde(default)]
    pub indicators: Vec<IndicatorReply>,
    #[serde(default)]
    pub summary: String,
}

pub fn parse_decision(text: &str) -> Result<(TradeKind, String), ParseFailure> {
    let reply: DecisionReply = parse_as(text)?;
    let action = TradeKind::parse(&reply.action)
        .ok_or_else(|| ParseFailure(format!("unknown action `{}`", reply.action)))?;
    Ok((action, reply.rationale))
}

/// Result of one structured exchange with a chat provider.
#[derive(Debug, Clone)]
pub struct Exchange<T> {
    pub value: Option<T>,
    pub transcript: Transcript,
    pub provider_error: Option<ProviderError>,
}

/// Sends `messages`, validates the reply with `accept`, and on failure retries
/// once with a repair prompt. `value` is `None` when both attempts fail or the
/// provider errors.
pub fn ask<T>(
    provider: &dyn ChatProvider,
    messages: Vec<ChatMessage>,
    params: &ChatParams,
    accept: impl Fn(&str) -> Result<T, ParseFailure>,
) -> Exchange<T> {
    let mut transcript = Transcript {
        input_text: render_transcript(&messages),
        ..Transcript::default()
    };
    let mut conversation = messages;
    for attempt in 0..2 {
        let reply = match provider.complete(&conversation, params) {
            Ok(reply) => reply,
            Err(e) => {
                transcript.flags.push(format!("provider error: {e}"));
                return Exchange { value: None, transcript, provider_error: Some(e) };
            }
        };
        transcript.output_text = reply.content.clone();
        transcript.reasoning_trace = reply.reasoning_trace.clone().unwrap_or_default();
        match accept(&reply.content) {
            Ok(value) => {
                if attempt > 0 {
                    transcript.flags.push("repaired after one retry".to_string());
                }
                return Exchange { value: Some(value), transcript, provider_error: None };
            }
            Err(e) if attempt == 0 => {
                conversation.push(ChatMessage::assistant(reply.content));
                conversation.push(ChatMessage::user(REPAIR.render(&[("error", e.0)])));
            }
            Err(e) => transcript.flags.push(format!("unparseable after retry: {e}")),
        }
    }
    Exchange { value: None, transcript, provider_error: None }
}
