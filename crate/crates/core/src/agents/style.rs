use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::parse::{ask, parse_as, ParseFailure, StyleReply};
use super::prompts::{notices, STYLE_SYSTEM, STYLE_USER};
use super::{fmt_num, fmt_opt_pct, AgentOutput, ChatMessage, FinanceSummary, Forecast, Providers, SentimentReport};
use crate::portfolio::AccountState;
use crate::risk::TradingStyle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePreference {
    pub style: TradingStyle,
    pub confidence: f64,
    pub rationale: String,
}

impl StylePreference {
    pub fn fallback() -> Self {
        Self { style: TradingStyle::Balanced, confidence: 0.5, rationale: "default style".to_string() }
    }
}

/// Realized next-day result of the style in force on `date`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleOutcome {
    pub date: NaiveDate,
    pub style: TradingStyle,
    pub pnl_pct: f64,
}

pub struct StyleInputs<'a> {
    pub date: NaiveDate,
    pub symbol: &'a str,
    pub account: &'a AccountState,
    pub unrealized_pnl: Option<f64>,
    pub previous: &'a StylePreference,
    /// Most recent last, already limited to the reflection window.
    pub recent_outcomes: &'a [StyleOutcome],
    pub forecast: &'a Forecast,
    pub sentiment: &'a SentimentReport,
    pub finance: &'a FinanceSummary,
    pub reflection: &'a str,
}

fn accept_style(text: &str) -> Result<StylePreference, ParseFailure> {
    let r: StyleReply = parse_as(text)?;
    let style = TradingStyle::parse(&r.style).ok_or_else(|| ParseFailure(format!("unknown style `{}`", r.style)))?;
    if !(0.0..=1.0).contains(&r.confidence) {
        return Err(ParseFailure(format!("confidence {} outside [0, 1]", r.confidence)));
    }
    Ok(StylePreference { style, confidence: r.confidence, rationale: r.rationale })
}

/// Two unusable replies give balanced at 0.5; a provider failure keeps the
/// previous preference.
pub fn run_style_agent(inputs: &StyleInputs<'_>, providers: &Providers) -> AgentOutput<StylePreference> {
    let outcomes = if inputs.recent_outcomes.is_empty() {
        notices().no_style_history.clone()
    } else {
        inputs
            .recent_outcomes
            .iter()
            .map(|o| format!("- {} {}: {:+.2}%", o.date, o.style, o.pnl_pct * 100.0))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let p = &inputs.forecast.probs;
    let system = STYLE_SYSTEM.render(&[("date", inputs.date.to_string()), ("symbol", inputs.symbol.to_string())]);
    let user = STYLE_USER.render(&[
        ("date", inputs.date.to_string()),
        ("cash", fmt_num(inputs.account.cash)),
        ("shares", fmt_num(inputs.account.shares)),
        ("equity", fmt_num(inputs.account.equity)),
        ("pnl", fmt_opt_pct(inputs.unrealized_pnl)),
        ("current_style", inputs.previous.style.to_string()),
        ("recent_outcomes", outcomes),
        ("gated_trend", inputs.forecast.gated.label.to_string()),
        ("p_up", fmt_num(p.p_up)),
        ("p_down", fmt_num(p.p_down)),
        ("p_side", fmt_num(p.p_side)),
        ("sentiment_score", format!("{:+.3}", inputs.sentiment.score)),
        ("finance_summary", inputs.finance.prompt_text()),
        ("reflection", inputs.reflection.to_string()),
    ]);
    let ex = ask(
        providers.chat.as_ref(),
        vec![ChatMessage::system(system), ChatMessage::user(user)],
        &providers.params,
        accept_style,
    );
    let mut transcript = ex.transcript;
    let value = match (ex.value, ex.provider_error) {
        (Some(v), _) => v,
        (None, Some(_)) => {
            transcript.flags.push(format!("style retained: {}", inputs.previous.style));
            inputs.previous.clone()
        }
        (None, None) => {
            transcript.flags.push("style fallback: balanced".to_string());
            StylePreference::fallback()
        }
    };
    AgentOutput { value, transcript }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agents::testing::{providers, Canned};
    use crate::gate::{GatePath, TrendDirection, TrendLabel, TrendProbabilities};

    fn run(replies: Vec<Result<&'static str, &'static str>>) -> (AgentOutput<StylePreference>, Arc<Canned>) {
        let chat = Arc::new(Canned::new(vec![("style", replies)]));
        let forecast = Forecast {
            probs: TrendProbabilities::uniform(),
            gated: TrendLabel { label: TrendDirection::Sideways, path: GatePath::DefaultSideways, reason: String::new() },
            confidence: 0.3,
            rationale: String::new(),
        };
        let sentiment = SentimentReport { score: 0.0, summary: String::new(), items_used: 0, items_failed: 0 };
        let finance = FinanceSummary { doc_id: None, indicators: vec![], summary: String::new(), retrieved: vec![] };
        let account = AccountState { cash: 400.0, shares: 3.0, avg_entry: Some(100.0), equity: 700.0 };
        let previous = StylePreference { style: TradingStyle::Aggressive, confidence: 0.7, rationale: "y".into() };
        let outcomes = [StyleOutcome { date: NaiveDate::from_ymd_opt(2024, 4, 1).unwrap(), style: TradingStyle::Aggressive, pnl_pct: 0.012 }];
        let inputs = StyleInputs {
            date: NaiveDate::from_ymd_opt(2024, 4, 2).unwrap(),
            symbol: "ACME",
            account: &account,
            unrealized_pnl: Some(-0.01),
            previous: &previous,
            recent_outcomes: &outcomes,
            forecast: &forecast,
            sentiment: &sentiment,
            finance: &finance,
            reflection: "",
        };
        (run_style_agent(&inputs, &providers(chat.clone())), chat)
    }

    #[test]
    fn parses_choice() {
        let (out, chat) = run(vec![Ok(r#"{"style":"conservative","confidence":0.9}"#)]);
        assert_eq!(out.value.style, TradingStyle::Conservative);
        assert_eq!(out.value.confidence, 0.9);
        let prompt = &chat.seen.lock().unwrap()[0][1].content;
        for needle in ["cash 400.0000", "shares 3.0000", "PnL -1.00%", "2024-04-01 aggressive: +1.20%"] {
            assert!(prompt.contains(needle), "missing {needle}");
        }
    }

    #[test]
    fn malformed_twice_falls_back_to_balanced() {
        let (out, _) = run(vec![Ok(r#"{"style":"yolo","confidence":0.9}"#)]);
        assert_eq!(out.value.style, TradingStyle::Balanced);
        assert_eq!(out.value.confidence, 0.5);
        assert!(out.transcript.flagged());
    }

    #[test]
    fn provider_error_retains_previous() {
        let (out, _) = run(vec![Err("timeout")]);
        assert_eq!(out.value.style, TradingStyle::Aggressive);
        assert_eq!(out.value.confidence, 0.7);
        assert!(out.transcript.flags[0].starts_with("provider error"));
    }
}
