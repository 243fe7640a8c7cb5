//! Deterministic chat provider for tests and offline runs.
//!
//! Selected with `provider = "stub:<policy>"`. Policies are joined with `+`:
//!
//! * `sideways` – forecasts sideways, holds.
//! * `always-up` – forecasts up with high probability, buys, aggressive style.
//! * `echo-forecast` – the decision follows the gated trend in its prompt
//!   (up → buy, down → sell, sideways → hold). Without `always-up` or
//!   `sideways` the forecast itself is drawn from a PRNG keyed on the seed,
//!   the agent and the date.
//! * `scripted:<file>` – replies come from a JSONL script of
//!   `{agent, date?, content?, reasoning?, error?}` entries. Entries sharing an
//!   `(agent, date)` key are served in order, the last one repeating.
//!   Unmatched calls fall back to the other policies.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use super::chat::{ChatMessage, ChatParams, ChatProvider, ChatResponse, Role};
use crate::error::{Error, ProviderError, Result};
use crate::retrieval::stub::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ForecastMode {
    Sideways,
    Up,
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DecisionMode {
    Hold,
    Buy,
    Echo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub agent: String,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub content: Option<String>,
    #[serde(default)]
    pub reasoning: Option<String>,
    #[serde(default)]
    pub error: bool,
}

type ScriptKey = (String, Option<String>);

#[derive(Debug)]
pub struct StubChatProvider {
    policy: String,
    forecast: ForecastMode,
    decision: DecisionMode,
    script: HashMap<ScriptKey, Vec<ScriptEntry>>,
    cursor: Mutex<HashMap<ScriptKey, usize>>,
}

impl StubChatProvider {
    /// Parses the part after `stub:`.
    pub fn from_policy(policy: &str) -> Result<Self> {
        let mut forecast = ForecastMode::Seeded;
        let mut decision = None;
        let mut script_entries = Vec::new();
        let mut echo = false;
        for token in policy.split('+').map(str::trim) {
            match token {
                "sideways" => {
                    forecast = ForecastMode::Sideways;
                    decision.get_or_insert(DecisionMode::Hold);
                }
                "always-up" => {
                    forecast = ForecastMode::Up;
                    decision.get_or_insert(DecisionMode::Buy);
                }
                "echo-forecast" => echo = true,
                t if t.starts_with("scripted:") => {
                    script_entries.extend(load_script(&t["scripted:".len()..])?);
                }
                other => {
                    return Err(Error::Provider(ProviderError::Config(format!(
                        "unknown stub policy `{other}`"
                    ))))
                }
            }
        }
        let decision = if echo {
            DecisionMode::Echo
        } else {
            decision.unwrap_or(DecisionMode::Hold)
        };
        if !echo && forecast == ForecastMode::Seeded && script_entries.is_empty() {
            forecast = ForecastMode::Sideways;
        }
        let mut script: HashMap<ScriptKey, Vec<ScriptEntry>> = HashMap::new();
        for e in script_entries {
            script.entry((e.agent.clone(), e.date.clone())).or_default().push(e);
        }
        Ok(Self {
            policy: policy.to_string(),
            forecast,
            decision,
            script,
            cursor: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_entries(entries: Vec<ScriptEntry>, fallback: &str) -> Result<Self> {
        let mut stub = Self::from_policy(fallback)?;
        for e in entries {
            stub.script.entry((e.agent.clone(), e.date.clone())).or_default().push(e);
        }
        Ok(stub)
    }

    fn scripted(&self, agent: &str, date: &str) -> Option<ScriptEntry> {
        let keys = [
            (agent.to_string(), Some(date.to_string())),
            (agent.to_string(), None),
        ];
        let key = keys.into_iter().find(|k| self.script.contains_key(k))?;
        let entries = &self.script[&key];
        let mut cursor = self.cursor.lock().expect("stub cursor poisoned");
        let i = cursor.entry(key).or_insert(0);
        let entry = entries[(*i).min(entries.len() - 1)].clone();
        *i += 1;
        Some(entry)
    }

    fn rng(&self, params: &ChatParams, agent: &str, date: &str, extra: &str) -> ChaCha8Rng {
        let key = fnv1a(format!("{agent}|{date}|{extra}").as_bytes());
        ChaCha8Rng::seed_from_u64(params.seed ^ key)
    }

    fn reply(&self, agent: &str, date: &str, messages: &[ChatMessage], params: &ChatParams) -> ChatResponse {
        let user = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let trace = |what: &str| Some(format!("stub:{} {what} for {agent} on {date}", self.policy));
        match agent {
            "news" => {
                let sentiment = match self.forecast {
                    ForecastMode::Sideways => 0.0,
                    ForecastMode::Up => 1.0,
                    ForecastMode::Seeded => {
                        let mut rng = self.rng(params, agent, date, user);
                        (rng.gen_range(-1.0..=1.0f64) * 100.0).round() / 100.0
                    }
                };
                ChatResponse {
                    content: json!({"sentiment": sentiment, "summary": first_line_after(user, "Headline: ")}).to_string(),
                    reasoning_trace: None,
                }
            }
            "report" => {
                let indicators: Vec<_> = user
                    .lines()
                    .filter_map(|l| {
                        let rest = l.strip_prefix("[chunk ")?;
                        let (n, text) = rest.split_once(']')?;
                        Some((n.parse::<usize>().ok()?, text.trim()))
                    })
                    .take(2)
                    .map(|(n, text)| {
                        let value: String = text.chars().take(80).collect();
                        json!({"name": format!("passage {n}"), "value": value, "chunk": n})
                    })
                    .collect();
                let summary = format!("{} cited passages", indicators.len());
                ChatResponse {
                    content: json!({"indicators": indicators, "summary": summary}).to_string(),
                    reasoning_trace: None,
                }
            }
            "forecast" => {
                let (up, down, side) = match self.forecast {
                    ForecastMode::Sideways => (0.1, 0.1, 0.8),
                    ForecastMode::Up => (0.8, 0.05, 0.15),
                    ForecastMode::Seeded => {
                        let mut rng = self.rng(params, agent, date, "");
                        let lead = rng.gen_range(0.4..0.9f64);
                        let rest = 1.0 - lead;
                        let split = rng.gen_range(0.0..1.0f64);
                        let (a, b) = (rest * split, rest * (1.0 - split));
                        match rng.gen_range(0..3) {
                            0 => (lead, a, b),
                            1 => (a, lead, b),
                            _ => (a, b, lead),
                        }
                    }
                };
                ChatResponse {
                    content: json!({"up": up, "down": down, "sideways": side, "confidence": up.max(down).max(side), "rationale": "stub forecast"}).to_string(),
                    reasoning_trace: trace("forecast"),
                }
            }
            "style" => {
                let (style, confidence) = match self.forecast {
                    ForecastMode::Sideways => ("balanced", 0.6),
                    ForecastMode::Up => ("aggressive", 0.8),
                    ForecastMode::Seeded => {
                        let mut rng = self.rng(params, agent, date, "");
                        let style = ["aggressive", "balanced", "conservative"][rng.gen_range(0..3)];
                        (style, (rng.gen_range(0.5..1.0f64) * 100.0).round() / 100.0)
                    }
                };
                ChatResponse {
                    content: json!({"style": style, "confidence": confidence, "rationale": "stub style"}).to_string(),
                    reasoning_trace: None,
                }
            }
            "decision" => {
                let action = match self.decision {
                    DecisionMode::Hold => "hold",
                    DecisionMode::Buy => "buy",
                    DecisionMode::Echo => match first_line_after(user, "gated_trend: ").as_str() {
                        "up" => "buy",
                        "down" => "sell",
                        _ => "hold",
                    },
                };
                ChatResponse {
                    content: json!({"action": action, "rationale": "stub decision"}).to_string(),
                    reasoning_trace: trace("decision"),
                }
            }
            _ => ChatResponse { content: "{}".to_string(), reasoning_trace: None },
        }
    }
}

fn first_line_after(text: &str, prefix: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or("")
        .trim()
        .to_string()
}

fn load_script(path: &str) -> Result<Vec<ScriptEntry>> {
    let text = std::fs::read_to_string(Path::new(path)).map_err(|e| {
        Error::Provider(ProviderError::Config(format!("cannot read stub script {path}: {e}")))
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Provider(ProviderError::Config(format!("stub script {path} line {}: {e}", i + 1)))
            })
        })
        .collect()
}

/// `(agent, date)` from the `[agent:..] [date:..]` header of the system message.
pub fn prompt_header(messages: &[ChatMessage]) -> Option<(String, String)> {
    let system = messages.iter().find(|m| m.role == Role::System)?;
    let first = system.content.lines().next()?;
    let tag = |name: &str| {
        let start = first.find(&format!("[{name}:"))? + name.len() + 2;
        let end = first[start..].find(']')? + start;
        Some(first[start..end].to_string())
    };
    Some((tag("agent")?, tag("date")?))
}

impl ChatProvider for StubChatProvider {
    fn complete(&self, messages: &[ChatMessage], params: &ChatParams) -> std::result::Result<ChatResponse, ProviderError> {
        let (agent, date) = prompt_header(messages)
            .ok_or_else(|| ProviderError::BadResponse("stub needs an [agent:..] [date:..] header".into()))?;
        if let Some(entry) = self.scripted(&agent, &date) {
            if entry.error {
                return Err(ProviderError::Transport(format!("scripted failure for {agent} on {date}")));
            }
            if let Some(content) = entry.content {
                return Ok(ChatResponse { content, reasoning_trace: entry.reasoning });
            }
        }
        Ok(self.reply(&agent, &date, messages, params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs(agent: &str, date: &str, user: &str) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(format!("[agent:{agent}] [date:{date}] [template:v1]\nhello")),
            ChatMessage::user(user),
        ]
    }

    #[test]
    fn header_parsing() {
        assert_eq!(
            prompt_header(&msgs("forecast", "2024-01-05", "")),
            Some(("forecast".to_string(), "2024-01-05".to_string()))
        );
        assert_eq!(prompt_header(&[ChatMessage::user("x")]), None);
    }

    #[test]
    fn echo_follows_gated_trend() {
        let stub = StubChatProvider::from_policy("echo-forecast").unwrap();
        let p = ChatParams::default();
        for (trend, action) in [("up", "buy"), ("down", "sell"), ("sideways", "hold")] {
            let r = stub.complete(&msgs("decision", "2024-01-05", &format!("Date: x\ngated_trend: {trend}\n")), &p).unwrap();
            assert!(r.content.contains(&format!("\"action\":\"{action}\"")), "{}", r.content);
        }
    }

    #[test]
    fn seeded_forecast_is_deterministic_and_valid() {
        let stub = StubChatProvider::from_policy("echo-forecast").unwrap();
        let p = ChatParams { seed: 17, ..ChatParams::default() };
        let a = stub.complete(&msgs("forecast", "2024-01-05", "x"), &p).unwrap();
        let b = stub.complete(&msgs("forecast", "2024-01-05", "different prompt"), &p).unwrap();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a.content).unwrap();
        let sum = v["up"].as_f64().unwrap() + v["down"].as_f64().unwrap() + v["sideways"].as_f64().unwrap();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scripted_sequence_and_errors() {
        let entries = vec![
            ScriptEntry { agent: "decision".into(), date: Some("2024-01-05".into()), content: Some("junk".into()), reasoning: None, error: false },
            ScriptEntry { agent: "decision".into(), date: Some("2024-01-05".into()), content: Some(r#"{"action":"sell"}"#.into()), reasoning: Some("think".into()), error: false },
            ScriptEntry { agent: "style".into(), date: None, content: None, reasoning: None, error: true },
        ];
        let stub = StubChatProvider::from_entries(entries, "sideways").unwrap();
        let p = ChatParams::default();
        assert_eq!(stub.complete(&msgs("decision", "2024-01-05", ""), &p).unwrap().content, "junk");
        let r = stub.complete(&msgs("decision", "2024-01-05", ""), &p).unwrap();
        assert_eq!(r.reasoning_trace.as_deref(), Some("think"));
        assert!(stub.complete(&msgs("style", "2024-02-01", ""), &p).is_err());
        // unscripted date falls back to the sideways policy
        assert!(stub.complete(&msgs("decision", "2024-01-08", ""), &p).unwrap().content.contains("hold"));
    }

    #[test]
    fn unknown_policy_rejected() {
        assert!(StubChatProvider::from_policy("yolo").is_err());
    }
}
