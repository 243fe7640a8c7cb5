use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::parse::{ask, parse_decision};
use super::prompts::{DECISION_SYSTEM, DECISION_USER};
use super::{fmt_num, fmt_opt_pct, AgentOutput, ChatMessage, FinanceSummary, Forecast, Providers, SentimentReport, StylePreference};
use crate::portfolio::{AccountState, TradeKind};
use crate::risk::RiskThresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: TradeKind,
    pub rationale: String,
}

pub struct DecisionInputs<'a> {
    pub date: NaiveDate,
    pub symbol: &'a str,
    pub close: f64,
    pub forecast: &'a Forecast,
    pub sentiment: &'a SentimentReport,
    pub finance: &'a FinanceSummary,
    pub style: &'a StylePreference,
    pub account: &'a AccountState,
    pub unrealized_pnl: Option<f64>,
    pub thresholds: &'a RiskThresholds,
    pub reflection: &'a str,
}

/// Falls back to hold on any failure.
pub fn run_decision_agent(inputs: &DecisionInputs<'_>, providers: &Providers) -> AgentOutput<Decision> {
    let f = inputs.forecast;
    let system = DECISION_SYSTEM.render(&[("date", inputs.date.to_string()), ("symbol", inputs.symbol.to_string())]);
    let user = DECISION_USER.render(&[
        ("date", inputs.date.to_string()),
        ("close", fmt_num(inputs.close)),
        ("gated_trend", f.gated.label.to_string()),
        ("p_up", fmt_num(f.probs.p_up)),
        ("p_down", fmt_num(f.probs.p_down)),
        ("p_side", fmt_num(f.probs.p_side)),
        ("gate_path", serde_json::to_value(f.gated.path).expect("enum serializes").as_str().unwrap_or_default().to_string()),
        ("forecast_rationale", f.rationale.clone()),
        ("sentiment_score", format!("{:+.3}", inputs.sentiment.score)),
        ("finance_summary", inputs.finance.prompt_text()),
        ("style", inputs.style.style.to_string()),
        ("style_confidence", format!("{:.2}", inputs.style.confidence)),
        ("cash", fmt_num(inputs.account.cash)),
        ("shares", fmt_num(inputs.account.shares)),
        ("equity", fmt_num(inputs.account.equity)),
        ("pnl", fmt_opt_pct(inputs.unrealized_pnl)),
        ("t_sl", format!("{:.2}%", inputs.thresholds.t_sl * 100.0)),
        ("t_tp", format!("{:.2}%", inputs.thresholds.t_tp * 100.0)),
        ("reflection", inputs.reflection.to_string()),
    ]);
    let ex = ask(
        providers.chat.as_ref(),
        vec![ChatMessage::system(system), ChatMessage::user(user)],
        &providers.params,
        parse_decision,
    );
    let mut transcript = ex.transcript;
    let value = match ex.value {
        Some((action, rationale)) => Decision { action, rationale },
        None => {
            transcript.flags.push("decision fallback: hold".to_string());
            Decision { action: TradeKind::Hold, rationale: "no usable decision".to_string() }
        }
    };
    AgentOutput { value, transcript }
}
