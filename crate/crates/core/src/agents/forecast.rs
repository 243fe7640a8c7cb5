use serde::{Deserialize, Serialize};

use super::parse::{ask, parse_as, ForecastReply, ParseFailure};
use super::prompts::{FORECAST_SYSTEM, FORECAST_USER};
use super::{fmt_num, AgentOutput, ChatMessage, FinanceSummary, Providers, SentimentReport};
use crate::gate::{classify_trend, GateConfig, TrendLabel, TrendProbabilities};
use crate::marketdata::IndicatorSnapshot;

/// Largest deviation of the probability sum from 1 that is still renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub probs: TrendProbabilities,
    pub gated: TrendLabel,
    pub confidence: f64,
    pub rationale: String,
}

pub struct ForecastInputs<'a> {
    pub symbol: &'a str,
    pub snapshot: &'a IndicatorSnapshot,
    pub sentiment: &'a SentimentReport,
    pub finance: &'a FinanceSummary,
    /// Experience summary, empty when self-reflection is off.
    pub reflection: &'a str,
}

fn accept_forecast(text: &str) -> Result<(TrendProbabilities, f64, String), ParseFailure> {
    let r: ForecastReply = parse_as(text)?;
    let raw = [r.up, r.down, r.sideways];
    if raw.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(ParseFailure(format!("probabilities must be finite and non-negative, got {raw:?}")));
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
        return Err(ParseFailure(format!("probabilities sum to {sum}, not 1")));
    }
    let probs = TrendProbabilities { p_up: r.up / sum, p_down: r.down / sum, p_side: r.sideways / sum };
    let confidence = r.confidence.unwrap_or_else(|| probs.p_up.max(probs.p_down).max(probs.p_side));
    if !(0.0..=1.0).contains(&confidence) {
        return Err(ParseFailure(format!("confidence {confidence} outside [0, 1]")));
    }
    Ok((probs, confidence, r.rationale))
}

/// Asks for a probability triple and passes it through the rule gate. Two
/// unusable replies yield uniform probabilities, which the gate maps to
/// sideways.
pub fn run_forecast_agent(inputs: &ForecastInputs<'_>, providers: &Providers, gate: &GateConfig) -> AgentOutput<Forecast> {
    let s = inputs.snapshot;
    let system = FORECAST_SYSTEM.render(&[("date", s.date.to_string()), ("symbol", inputs.symbol.to_string())]);
    let user = FORECAST_USER.render(&[
        ("date", s.date.to_string()),
        ("close", fmt_num(s.close)),
        ("rsi14", format!("{:.2}", s.rsi14)),
        ("dist_sma20_pct", format!("{:.2}", s.dist_sma20_pct)),
        ("dist_high20_pct", format!("{:.2}", s.dist_high20_pct)),
        ("dist_low20_pct", format!("{:.2}", s.dist_low20_pct)),
        ("new_high20", s.new_high20.to_string()),
        ("new_low20", s.new_low20.to_string()),
        ("hv10_pct", format!("{:.2}", s.hv10_pct)),
        ("atr20s_pct", format!("{:.2}", s.atr20s_pct)),
        ("sentiment_score", format!("{:+.3}", inputs.sentiment.score)),
        ("sentiment_items", inputs.sentiment.items_used.to_string()),
        ("sentiment_summary", inputs.sentiment.summary.clone()),
        ("finance_summary", inputs.finance.prompt_text()),
        ("reflection", inputs.reflection.to_string()),
    ]);
    let ex = ask(
        providers.chat.as_ref(),
        vec![ChatMessage::system(system), ChatMessage::user(user)],
        &providers.params,
        accept_forecast,
    );
    let mut transcript = ex.transcript;
    let (probs, confidence, rationale) = ex.value.unwrap_or_else(|| {
        transcript.flags.push("forecast fallback: uniform probabilities".to_string());
        (TrendProbabilities::uniform(), 0.0, "no usable forecast".to_string())
    });
    let gated = classify_trend(&probs, s, gate).expect("renormalized probabilities and a built snapshot are valid");
    AgentOutput { value: Forecast { probs, gated, confidence, rationale }, transcript }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use chrono::NaiveDate;

    use super::*;
    use crate::agents::testing::{providers, Canned};
    use crate::agents::ChatProvider;
    use crate::gate::{GatePath, TrendDirection};

    fn snap(rsi14: f64, dist_high20_pct: f64, new_high20: bool) -> IndicatorSnapshot {
        IndicatorSnapshot {
            date: NaiveDate::from_ymd_opt(2024, 4, 1).unwrap(),
            close: 100.0,
            rsi14,
            dist_sma20_pct: 1.5,
            dist_high20_pct,
            dist_low20_pct: 8.0,
            new_high20,
            new_low20: false,
            hv10_pct: 25.0,
            atr20s_pct: 1.2,
            mean_log_return20: 0.001,
        }
    }

    fn run(chat: Arc<dyn ChatProvider>, snapshot: &IndicatorSnapshot) -> AgentOutput<Forecast> {
        let sentiment = SentimentReport { score: 0.2, summary: "calm".into(), items_used: 1, items_failed: 0 };
        let finance = FinanceSummary { doc_id: None, indicators: vec![], summary: "none".into(), retrieved: vec![] };
        let inputs = ForecastInputs { symbol: "ACME", snapshot, sentiment: &sentiment, finance: &finance, reflection: "LESSONS" };
        run_forecast_agent(&inputs, &providers(chat), &GateConfig::default())
    }

    #[test]
    fn breakout_passes_up() {
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok(r#"{"up":0.7,"down":0.1,"sideways":0.2}"#)])]));
        let out = run(chat.clone(), &snap(60.0, 0.0, true));
        assert_eq!(out.value.gated.label, TrendDirection::Up);
        assert_eq!(out.value.gated.path, GatePath::SoftPassUp);
        let prompt = &chat.seen.lock().unwrap()[0][1].content;
        for needle in ["RSI-14: 60.00", "New 20-day high: true", "News sentiment: +0.200", "LESSONS", "none"] {
            assert!(prompt.contains(needle), "missing {needle}");
        }
    }

    #[test]
    fn malformed_twice_gives_uniform_sideways() {
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok("I think it goes up")])]));
        let out = run(chat.clone(), &snap(60.0, 0.0, true));
        assert_eq!(out.value.probs, TrendProbabilities::uniform());
        assert_eq!(out.value.gated.label, TrendDirection::Sideways);
        assert!(out.transcript.flagged());
        assert_eq!(chat.seen.lock().unwrap().len(), 2);
    }

    #[test]
    fn overheated_rsi_intercepts() {
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok(r#"{"up":0.5,"down":0.3,"sideways":0.2}"#)])]));
        let out = run(chat, &snap(78.0, -5.0, false));
        assert_eq!(out.value.gated.label, TrendDirection::Sideways);
        assert_eq!(out.value.gated.path, GatePath::HardIntercept);
    }

    #[test]
    fn near_unit_sum_is_renormalized() {
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok(r#"{"up":0.72,"down":0.1,"sideways":0.2}"#)])]));
        let out = run(chat, &snap(60.0, 0.0, true));
        let p = out.value.probs;
        assert!((p.p_up + p.p_down + p.p_side - 1.0).abs() < 1e-12);
        assert!((p.p_up - 0.72 / 1.02).abs() < 1e-12);
        assert!(!out.transcript.flagged());
    }

    #[test]
    fn far_sum_is_distrusted() {
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok(r#"{"up":0.9,"down":0.1,"sideways":0.2}"#)])]));
        let out = run(chat, &snap(60.0, 0.0, true));
        assert_eq!(out.value.probs, TrendProbabilities::uniform());
    }

    #[test]
    fn gated_matches_classifier() {
        let snapshot = snap(55.0, -0.4, false);
        let chat = Arc::new(Canned::new(vec![("forecast", vec![Ok(r#"{"up":0.2,"down":0.6,"sideways":0.2}"#)])]));
        let out = run(chat, &snapshot);
        assert_eq!(out.value.gated, classify_trend(&out.value.probs, &snapshot, &GateConfig::default()).unwrap());
        assert_eq!(out.transcript.reasoning_trace, "trace");
    }
}
