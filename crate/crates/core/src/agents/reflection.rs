use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::prompts::{notices, REFLECTION, REFLECTION_EMPTY};

pub const REFLECTION_WINDOW: usize = 20;
const HIGHLIGHTS_PER_SIDE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audience {
    Forecasting,
    Style,
    Decision,
}

impl Audience {
    pub fn as_str(self) -> &'static str {
        match self {
            Audience::Forecasting => "forecasting",
            Audience::Style => "style",
            Audience::Decision => "decision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Loss,
}

/// One labeled past record. `score` is the audience's label value: reward for
/// decisions, weighted hit for forecasts, realized PnL for styles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionEntry {
    pub date: NaiveDate,
    pub score: f64,
    pub pattern: String,
}

impl ReflectionEntry {
    pub fn outcome(&self) -> Outcome {
        if self.score > 0.0 {
            Outcome::Win
        } else {
            Outcome::Loss
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightedCase {
    pub date: NaiveDate,
    pub outcome: Outcome,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSummary {
    pub window_days: usize,
    pub wins: usize,
    pub losses: usize,
    pub highlighted_cases: Vec<HighlightedCase>,
    pub text: String,
}

/// Digest of the last `window` records of a date-sorted history: win/loss
/// counts plus the two largest wins and losses by |score| (later date first
/// on ties).
pub fn build_reflection(history: &[ReflectionEntry], window: usize, audience: Audience) -> ReflectionSummary {
    let recent = &history[history.len().saturating_sub(window)..];
    if recent.is_empty() {
        return ReflectionSummary {
            window_days: 0,
            wins: 0,
            losses: 0,
            highlighted_cases: Vec::new(),
            text: REFLECTION_EMPTY.render(&[("audience", audience.as_str().to_string())]),
        };
    }
    let pick = |outcome: Outcome| {
        let mut side: Vec<&ReflectionEntry> = recent.iter().filter(|e| e.outcome() == outcome).collect();
        side.sort_by(|a, b| b.score.abs().total_cmp(&a.score.abs()).then(b.date.cmp(&a.date)));
        side.truncate(HIGHLIGHTS_PER_SIDE);
        side
    };
    let (best, worst) = (pick(Outcome::Win), pick(Outcome::Loss));
    let wins = recent.iter().filter(|e| e.outcome() == Outcome::Win).count();
    let lines = |cases: &[&ReflectionEntry]| {
        if cases.is_empty() {
            return notices().no_cases.clone();
        }
        cases
            .iter()
            .map(|e| format!("- {} ({:+.4}): {}", e.date, e.score, e.pattern))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let text = REFLECTION.render(&[
        ("audience", audience.as_str().to_string()),
        ("window", recent.len().to_string()),
        ("wins", wins.to_string()),
        ("losses", (recent.len() - wins).to_string()),
        ("win_cases", lines(&best)),
        ("loss_cases", lines(&worst)),
    ]);
    let highlighted_cases = best
        .iter()
        .chain(worst.iter())
        .map(|e| HighlightedCase { date: e.date, outcome: e.outcome(), pattern: e.pattern.clone() })
        .collect();
    ReflectionSummary {
        window_days: recent.len(),
        wins,
        losses: recent.len() - wins,
        highlighted_cases,
        text,
    }
}
