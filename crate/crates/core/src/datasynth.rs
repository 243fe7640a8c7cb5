//! Next-day labeling of forecasts and decisions, trajectory records and
//! fine-tuning sample export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentName, Transcript};
use crate::error::{Error, Result};
use crate::gate::{TrendDirection, TrendProbabilities};
use crate::marketdata::{mean_abs_log_return, PriceSeries};
use crate::portfolio::{apply_action, AccountState, TradeAction, TradeKind};
use crate::risk::TradingStyle;

const BAND_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub alpha: f64,
    pub epsilon_min: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { alpha: 1.0, epsilon_min: 0.005 }
    }
}

impl BandConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.epsilon_min > 0.0) {
            return Err(Error::Config("band.alpha and band.epsilon_min must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { beta: 0.2, gamma: 1.0 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::Config("reward.beta and reward.gamma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Export thresholds: decisions need `taken_reward > min_reward`, forecasts
/// need `w_hit >= whit_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftFilter {
    pub min_reward: f64,
    pub whit_min: f64,
}

impl Default for SftFilter {
    fn default() -> Self {
        Self { min_reward: 0.0, whit_min: 0.3 }
    }
}

/// Sideways half-width: `max(alpha * mean |log return| over 20 days, epsilon_min)`.
pub fn epsilon_band(series: &PriceSeries, at: NaiveDate, cfg: &BandConfig) -> Result<f64> {
    let mean = mean_abs_log_return(series.closes_upto(at), BAND_WINDOW)?;
    Ok((cfg.alpha * mean).max(cfg.epsilon_min))
}

pub fn realized_pct(p0: f64, p1: f64) -> Result<f64> {
    if !(p0 > 0.0) {
        return Err(Error::invalid(format!("non-positive base price {p0}")));
    }
    Ok(p1 / p0 - 1.0)
}

/// Direction the market actually took relative to the band.
pub fn realized_direction(pct: f64, epsilon: f64) -> TrendDirection {
    if pct > epsilon {
        TrendDirection::Up
    } else if pct < -epsilon {
        TrendDirection::Down
    } else {
        TrendDirection::Sideways
    }
}

pub fn label_direction(predicted: TrendDirection, pct: f64, epsilon: f64) -> u8 {
    u8::from(predicted == realized_direction(pct, epsilon))
}

pub fn weighted_hit(sign_ok: u8, pct: f64, epsilon: f64, p_true: f64) -> f64 {
    f64::from(sign_ok) * (pct.abs() / epsilon).tanh() * p_true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastLabel {
    pub epsilon: f64,
    pub pct: f64,
    pub realized: TrendDirection,
    pub sign_ok: u8,
    pub p_true: f64,
    pub w_hit: f64,
}

pub fn label_forecast(predicted: TrendDirection, probs: &TrendProbabilities, pct: f64, epsilon: f64) -> ForecastLabel {
    let realized = realized_direction(pct, epsilon);
    let sign_ok = label_direction(predicted, pct, epsilon);
    let p_true = probs.of(realized);
    ForecastLabel { epsilon, pct, realized, sign_ok, p_true, w_hit: weighted_hit(sign_ok, pct, epsilon, p_true) }
}

/// Equity and commission of one simulated action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub equity: f64,
    pub commission: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerAction<T> {
    pub buy: T,
    pub hold: T,
    pub sell: T,
}

impl<T: Copy> PerAction<T> {
    pub fn get(&self, kind: TradeKind) -> T {
        match kind {
            TradeKind::Buy => self.buy,
            TradeKind::Hold => self.hold,
            TradeKind::Sell => self.sell,
        }
    }

    fn build(mut f: impl FnMut(TradeKind) -> Result<T>) -> Result<Self> {
        Ok(Self { buy: f(TradeKind::Buy)?, hold: f(TradeKind::Hold)?, sell: f(TradeKind::Sell)? })
    }
}

/// Executes each action on a copy of `account` at `price_exec` and marks the
/// copy at `price_next`.
pub fn counterfactual_equities(
    account: &AccountState,
    style: TradingStyle,
    price_exec: f64,
    price_next: f64,
    commission_rate: f64,
    date: NaiveDate,
) -> Result<PerAction<Counterfactual>> {
    if !(price_next > 0.0) {
        return Err(Error::invalid(format!("non-positive mark price {price_next}")));
    }
    PerAction::build(|kind| {
        let (after, record) = apply_action(account, TradeAction::agent(kind, style), price_exec, commission_rate, date)?;
        Ok(Counterfactual { equity: after.marked(price_next).equity, commission: record.commission })
    })
}

/// `r_eq - beta * r_bm - gamma * c` with returns and cost relative to `e_prev`.
pub fn action_reward(e_prev: f64, e_a: f64, r_bm: f64, commission: f64, cfg: &RewardConfig) -> Result<f64> {
    if !(e_prev > 0.0) {
        return Err(Error::invalid(format!("non-positive prior equity {e_prev}")));
    }
    let r_eq = (e_a - e_prev) / e_prev;
    let c = commission / e_prev;
    Ok(r_eq - cfg.beta * r_bm - cfg.gamma * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLabel {
    pub equity: f64,
    pub r_eq: f64,
    pub cost: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLabel {
    pub e_prev: f64,
    pub r_bm: f64,
    pub actions: PerAction<ActionLabel>,
    pub taken: TradeKind,
    pub taken_reward: f64,
}

pub fn label_decision(
    account: &AccountState,
    style: TradingStyle,
    taken: TradeKind,
    price_exec: f64,
    price_next: f64,
    commission_rate: f64,
    date: NaiveDate,
    cfg: &RewardConfig,
) -> Result<DecisionLabel> {
    let e_prev = account.marked(price_exec).equity;
    let r_bm = realized_pct(price_exec, price_next)?;
    let cf = counterfactual_equities(account, style, price_exec, price_next, commission_rate, date)?;
    let actions = PerAction::build(|kind| {
        let Counterfactual { equity, commission } = cf.get(kind);
        Ok(ActionLabel {
            equity,
            r_eq: (equity - e_prev) / e_prev,
            cost: commission / e_prev,
            reward: action_reward(e_prev, equity, r_bm, commission, cfg)?,
        })
    })?;
    Ok(DecisionLabel { e_prev, r_bm, actions, taken, taken_reward: actions.get(taken).reward })
}

/// What one trading day needs for labeling once the next close is known.
#[derive(Debug, Clone)]
pub struct DayOutcome<'a> {
    pub date: NaiveDate,
    pub next_date: NaiveDate,
    pub predicted: TrendDirection,
    pub probs: &'a TrendProbabilities,
    /// Account before any of the day's trades.
    pub account: &'a AccountState,
    pub style: TradingStyle,
    pub decided: TradeKind,
}

pub fn label_day(
    series: &PriceSeries,
    day: &DayOutcome<'_>,
    commission_rate: f64,
    band: &BandConfig,
    reward: &RewardConfig,
) -> Result<(ForecastLabel, DecisionLabel)> {
    let p0 = series
        .close_at(day.date)
        .ok_or_else(|| Error::invalid(format!("no close on {}", day.date)))?;
    let p1 = series
        .close_at(day.next_date)
        .ok_or_else(|| Error::invalid(format!("no close on {}", day.next_date)))?;
    let epsilon = epsilon_band(series, day.date, band)?;
    let pct = realized_pct(p0, p1)?;
    let forecast = label_forecast(day.predicted, day.probs, pct, epsilon);
    let decision = label_decision(day.account, day.style, day.decided, p0, p1, commission_rate, day.date, reward)?;
    Ok((forecast, decision))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountSnapshot {
    pub cash: f64,
    pub shares: f64,
    pub equity: f64,
    pub style: TradingStyle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<ForecastLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub date: NaiveDate,
    pub symbol: String,
    pub agent_name: AgentName,
    pub prompt_digest: String,
    pub input_text: String,
    pub output_text: String,
    pub reasoning_trace: String,
    pub flags: Vec<String>,
    /// The agent's parsed (or fallback) output.
    pub parsed: serde_json::Value,
    pub account_snapshot: AccountSnapshot,
    /// Absent until the next trading day's close is known.
    pub labels: Option<Labels>,
}

pub fn prompt_digest(input_text: &str) -> String {
    hex::encode(Sha256::digest(input_text.as_bytes()))
}

impl TrajectoryRecord {
    pub fn new(
        date: NaiveDate,
        symbol: &str,
        agent_name: AgentName,
        transcript: Transcript,
        parsed: serde_json::Value,
        account_snapshot: AccountSnapshot,
    ) -> Self {
        Self {
            date,
            symbol: symbol.to_string(),
            agent_name,
            prompt_digest: prompt_digest(&transcript.input_text),
            input_text: transcript.input_text,
            output_text: transcript.output_text,
            reasoning_trace: transcript.reasoning_trace,
            flags: transcript.flags,
            parsed,
            account_snapshot,
            labels: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SftSource {
    Forecast,
    Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftSample {
    pub instruction: String,
    pub response: String,
    pub score: f64,
    pub source: SftSource,
}

fn response_text(r: &TrajectoryRecord) -> String {
    if r.reasoning_trace.is_empty() {
        r.output_text.clone()
    } else {
        format!("<think>\n{}\n</think>\n{}", r.reasoning_trace, r.output_text)
    }
}

/// Forecast records with `w_hit >= whit_min` and decision records with
/// `taken_reward > min_reward`, in input order. Unlabeled records never pass.
pub fn filter_sft(records: &[TrajectoryRecord], filter: &SftFilter) -> Vec<SftSample> {
    records
        .iter()
        .filter_map(|r| {
            let labels = r.labels.as_ref()?;
            let (source, score) = match r.agent_name {
                AgentName::Forecast => {
                    let w = labels.forecast.as_ref()?.w_hit;
                    (w >= filter.whit_min).then_some((SftSource::Forecast, w))?
                }
                AgentName::Decision => {
                    let reward = labels.decision.as_ref()?.taken_reward;
                    (reward > filter.min_reward).then_some((SftSource::Decision, reward))?
                }
                _ => return None,
            };
            Some(SftSample { instruction: r.input_text.clone(), response: response_text(r), score, source })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::data(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn emit_trajectories(records: &[TrajectoryRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path, records)
}
