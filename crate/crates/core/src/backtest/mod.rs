//! Day loop, run artifacts and replay.
//!
//! Each trading day, at the close: indicators, risk check on the open
//! position, then news, report, forecast, style and decision agents in that
//! order, then execution. The previous day is labeled as soon as today's
//! close is known, so reflections only ever see settled outcomes.

mod config;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use config::{BacktestConfig, ChatSection, Features, HttpSection};

use crate::agents::{
    build_reflection, run_decision_agent, run_forecast_agent, run_news_agent, run_report_agent, run_style_agent,
    AgentName, AgentOutput, Audience, DecisionInputs, ForecastInputs, Providers, ReflectionEntry, ReportStore,
    StyleInputs, StyleOutcome, StylePreference, Transcript, REFLECTION_WINDOW,
};
use crate::datasynth::{
    filter_sft, label_day, read_jsonl, write_jsonl, AccountSnapshot, DayOutcome, Labels, SftSample,
    TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::gate::TrendDirection;
use crate::marketdata::{build_snapshot, load_price_csv, PriceSeries, SNAPSHOT_MIN_CLOSES};
use crate::portfolio::{
    apply_action, unrealized_pnl_pct, AccountState, ActionOrigin, MetricsReport, TradeAction, TradeKind, TradeRecord,
};
use crate::retrieval::{load_news_jsonl, NewsItem};
use crate::risk::{compute_thresholds, evaluate_position, RiskAction, TradingStyle};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRADES_FILE: &str = "trades.jsonl";
pub const EQUITY_FILE: &str = "equity.jsonl";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const SFT_FILE: &str = "sft.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const SEED_FILE: &str = "seed";

/// Closes consumed for indicators only; trading starts on the bar after them.
pub const WARMUP_CLOSES: usize = SNAPSHOT_MIN_CLOSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquityPoint {
    pub date: NaiveDate,
    pub close: f64,
    pub cash: f64,
    pub shares: f64,
    pub equity: f64,
}

/// Loaded inputs of one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub prices: PriceSeries,
    pub news: Vec<NewsItem>,
    pub reports: ReportStore,
}

impl RunData {
    pub fn load(prices: &Path, news: Option<&Path>, reports: Option<&Path>) -> Result<Self> {
        Ok(Self {
            prices: load_price_csv(prices)?,
            news: news.map(load_news_jsonl).transpose()?.unwrap_or_default(),
            reports: reports.map(ReportStore::load_dir).transpose()?.unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trades: Vec<TradeRecord>,
    pub equity: Vec<EquityPoint>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub sft: Vec<SftSample>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub metrics: MetricsReport,
}

/// Everything about a finished day that labeling needs.
struct PendingDay {
    date: NaiveDate,
    predicted: TrendDirection,
    probs: crate::gate::TrendProbabilities,
    account_before: AccountState,
    account_after: AccountState,
    style: TradingStyle,
    decided: TradeKind,
    forecast_record: usize,
    decision_record: usize,
    pattern: String,
}

#[derive(Default)]
struct Memory {
    forecast: Vec<ReflectionEntry>,
    style: Vec<ReflectionEntry>,
    decision: Vec<ReflectionEntry>,
    style_outcomes: Vec<StyleOutcome>,
}

impl Memory {
    fn reflection(&self, audience: Audience, enabled: bool) -> String {
        if !enabled {
            return String::new();
        }
        let history = match audience {
            Audience::Forecasting => &self.forecast,
            Audience::Style => &self.style,
            Audience::Decision => &self.decision,
        };
        build_reflection(history, REFLECTION_WINDOW, audience).text
    }

    fn recent_styles(&self) -> &[StyleOutcome] {
        &self.style_outcomes[self.style_outcomes.len().saturating_sub(REFLECTION_WINDOW)..]
    }
}

/// Indices of the bars traded under `cfg`.
fn trading_range(cfg: &BacktestConfig, prices: &PriceSeries) -> Result<(usize, usize)> {
    let bars = prices.bars();
    let first_allowed = WARMUP_CLOSES;
    if bars.len() <= WARMUP_CLOSES {
        return Err(Error::InsufficientHistory { need: WARMUP_CLOSES + 1, have: bars.len() });
    }
    let first = match cfg.start {
        Some(d) => bars.partition_point(|b| b.date < d),
        None => first_allowed,
    };
    let last = match cfg.end {
        Some(d) if d > bars[bars.len() - 1].date => {
            return Err(Error::invalid(format!(
                "no prices after {} but the range ends {d}",
                bars[bars.len() - 1].date
            )))
        }
        Some(d) => prices.index_at(d).ok_or_else(|| Error::invalid("range ends before the first price"))?,
        None => bars.len() - 1,
    };
    if first < first_allowed {
        return Err(Error::InsufficientHistory { need: WARMUP_CLOSES, have: first });
    }
    if first > last {
        return Err(Error::invalid("empty trading range"));
    }
    Ok((first, last))
}

fn snapshot_of(account: &AccountState, style: TradingStyle) -> AccountSnapshot {
    AccountSnapshot { cash: account.cash, shares: account.shares, equity: account.equity, style }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("agent outputs serialize")
}

/// Runs the whole pipeline in memory.
pub fn run_backtest_with(cfg: &BacktestConfig, data: &RunData, providers: &Providers) -> Result<RunResult> {
    cfg.validate()?;
    let series = &data.prices;
    let (first, last) = trading_range(cfg, series)?;
    let keywords = cfg.keywords()?;
    let f = cfg.features;
    let bars = series.bars();

    let mut account = AccountState::new(cfg.initial_cash);
    let mut style_pref = StylePreference::fallback();
    let mut trades = Vec::new();
    let mut equity = vec![EquityPoint {
        date: bars[first - 1].date,
        close: bars[first - 1].close,
        cash: account.cash,
        shares: 0.0,
        equity: account.equity,
    }];
    let mut trajectories: Vec<TrajectoryRecord> = Vec::new();
    let mut memory = Memory::default();
    let mut pending: Option<PendingDay> = None;

    for i in first..=last {
        let date = bars[i].date;
        let close = bars[i].close;

        if let Some(prev) = pending.take() {
            settle(&prev, date, cfg, series, &mut trajectories, &mut memory)?;
        }

        let snap = build_snapshot(series, date)?;
        let account_before = account.marked(close);
        let pnl = unrealized_pnl_pct(&account_before, close).ok();

        // morning check uses the style carried over from the previous day
        let carried = style_pref.style;
        let thresholds = compute_thresholds(carried, series, date, &cfg.risk)?;
        let forced = match (f.risk_management, pnl) {
            (true, Some(p)) => match evaluate_position(p, &thresholds).action {
                RiskAction::ForcedSell => Some(ActionOrigin::ForcedSell),
                RiskAction::TakeProfit => Some(ActionOrigin::TakeProfit),
                RiskAction::None => None,
            },
            _ => None,
        };

        let prev_date = if i > 0 { Some(bars[i - 1].date) } else { None };
        let todays_news: Vec<NewsItem> = data
            .news
            .iter()
            .filter(|n| n.date <= date && prev_date.map_or(true, |p| n.date > p))
            .cloned()
            .collect();

        let news = run_news_agent(date, &cfg.symbol, &todays_news, &keywords, &cfg.retrieval, providers, f.rerank_embedding);
        let report = run_report_agent(date, &cfg.symbol, &data.reports, &cfg.retrieval, providers, f.rerank_embedding);

        let forecast_reflection = memory.reflection(Audience::Forecasting, f.self_reflection);
        let forecast = run_forecast_agent(
            &ForecastInputs {
                symbol: &cfg.symbol,
                snapshot: &snap,
                sentiment: &news.value,
                finance: &report.value,
                reflection: &forecast_reflection,
            },
            providers,
            &cfg.gate,
        );

        let style = if f.style_and_state {
            let style_reflection = memory.reflection(Audience::Style, f.self_reflection);
            run_style_agent(
                &StyleInputs {
                    date,
                    symbol: &cfg.symbol,
                    account: &account_before,
                    unrealized_pnl: pnl,
                    previous: &style_pref,
                    recent_outcomes: memory.recent_styles(),
                    forecast: &forecast.value,
                    sentiment: &news.value,
                    finance: &report.value,
                    reflection: &style_reflection,
                },
                providers,
            )
        } else {
            AgentOutput {
                value: StylePreference::fallback(),
                transcript: Transcript { flags: vec!["style agent disabled".to_string()], ..Transcript::default() },
            }
        };
        style_pref = style.value.clone();
        let todays_style = style_pref.style;

        let decision_reflection = memory.reflection(Audience::Decision, f.self_reflection);
        let decision = run_decision_agent(
            &DecisionInputs {
                date,
                symbol: &cfg.symbol,
                close,
                forecast: &forecast.value,
                sentiment: &news.value,
                finance: &report.value,
                style: &style.value,
                account: &account_before,
                unrealized_pnl: pnl,
                thresholds: &thresholds,
                reflection: &decision_reflection,
            },
            providers,
        );

        let action = match forced {
            Some(origin) => TradeAction { kind: TradeKind::Sell, style: todays_style, origin },
            None => TradeAction::agent(decision.value.action, todays_style),
        };
        let (after, record) = apply_action(&account_before, action, close, cfg.commission_rate, date)?;
        if record.quantity > 0.0 {
            trades.push(record);
        }
        account = after;
        equity.push(EquityPoint { date, close, cash: account.cash, shares: account.shares, equity: account.equity });

        let snapshot = snapshot_of(&account_before, todays_style);
        let base = trajectories.len();
        trajectories.push(TrajectoryRecord::new(date, &cfg.symbol, AgentName::News, news.transcript, to_value(&news.value), snapshot.clone()));
        trajectories.push(TrajectoryRecord::new(date, &cfg.symbol, AgentName::Report, report.transcript, to_value(&report.value), snapshot.clone()));
        trajectories.push(TrajectoryRecord::new(date, &cfg.symbol, AgentName::Forecast, forecast.transcript, to_value(&forecast.value), snapshot.clone()));
        trajectories.push(TrajectoryRecord::new(date, &cfg.symbol, AgentName::Style, style.transcript, to_value(&style.value), snapshot.clone()));
        trajectories.push(TrajectoryRecord::new(date, &cfg.symbol, AgentName::Decision, decision.transcript, to_value(&decision.value), snapshot));

        pending = Some(PendingDay {
            date,
            predicted: forecast.value.gated.label,
            probs: forecast.value.probs,
            account_before,
            account_after: account.clone(),
            style: todays_style,
            decided: decision.value.action,
            forecast_record: base + 2,
            decision_record: base + 4,
            pattern: format!(
                "RSI {:.1}, {:+.2}% from 20-day high, sentiment {:+.2}, gated {} via {:?}",
                snap.rsi14, snap.dist_high20_pct, news.value.score, forecast.value.gated.label, forecast.value.gated.path
            ),
        });
    }

    let curve: Vec<f64> = equity.iter().map(|p| p.equity).collect();
    let metrics = MetricsReport::from_curve(&curve, trades.len())?;
    let sft = filter_sft(&trajectories, &cfg.sft);
    Ok(RunResult { trades, equity, trajectories, sft, metrics })
}

/// Labels `day` with the close of `next_date` and feeds the outcome to the
/// reflection memory.
fn settle(
    day: &PendingDay,
    next_date: NaiveDate,
    cfg: &BacktestConfig,
    series: &PriceSeries,
    trajectories: &mut [TrajectoryRecord],
    memory: &mut Memory,
) -> Result<()> {
    let outcome = DayOutcome {
        date: day.date,
        next_date,
        predicted: day.predicted,
        probs: &day.probs,
        account: &day.account_before,
        style: day.style,
        decided: day.decided,
    };
    let (fl, dl) = label_day(series, &outcome, cfg.commission_rate, &cfg.band, &cfg.reward)?;

    let forecast_score = if fl.sign_ok == 1 {
        fl.w_hit
    } else {
        -(fl.pct.abs() / fl.epsilon).tanh() * day.probs.of(day.predicted)
    };
    memory.forecast.push(ReflectionEntry {
        date: day.date,
        score: forecast_score,
        pattern: format!("predicted {}, realized {} ({:+.2}%); {}", day.predicted, fl.realized, fl.pct * 100.0, day.pattern),
    });
    memory.decision.push(ReflectionEntry {
        date: day.date,
        score: dl.taken_reward,
        pattern: format!("{} as {} (reward {:+.4}); {}", day.decided, day.style, dl.taken_reward, day.pattern),
    });
    let next_close = series.close_at(next_date).expect("labeled day has a close");
    let style_pnl = day.account_after.marked(next_close).equity / dl.e_prev - 1.0;
    memory.style.push(ReflectionEntry {
        date: day.date,
        score: style_pnl,
        pattern: format!("{} style, account {:+.2}% next day", day.style, style_pnl * 100.0),
    });
    memory.style_outcomes.push(StyleOutcome { date: day.date, style: day.style, pnl_pct: style_pnl });

    trajectories[day.forecast_record].labels = Some(Labels { forecast: Some(fl), decision: None });
    trajectories[day.decision_record].labels = Some(Labels { forecast: None, decision: Some(dl) });
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_artifacts(cfg: &BacktestConfig, result: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_toml())?;
    write_jsonl(dir.join(TRADES_FILE), &result.trades)?;
    write_jsonl(dir.join(EQUITY_FILE), &result.equity)?;
    write_jsonl(dir.join(TRAJECTORIES_FILE), &result.trajectories)?;
    write_jsonl(dir.join(SFT_FILE), &result.sft)?;
    let mut metrics = serde_json::to_string_pretty(&result.metrics)?;
    metrics.push('\n');
    write_text(&dir.join(METRICS_FILE), &metrics)?;
    write_text(&dir.join(SEED_FILE), &format!("{}\n", cfg.seed))
}

/// Loads inputs, runs with the configured providers and writes artifacts to `out`.
pub fn run_backtest(
    cfg: &BacktestConfig,
    prices: &Path,
    news: Option<&Path>,
    reports: Option<&Path>,
    out: &Path,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    let data = RunData::load(prices, news, reports)?;
    let providers = cfg.providers()?;
    let result = run_backtest_with(cfg, &data, &providers)?;
    write_artifacts(cfg, &result, out)?;
    Ok(RunArtifacts { dir: out.to_path_buf(), metrics: result.metrics })
}

pub fn read_metrics(run: &Path) -> Result<MetricsReport> {
    let path = run.join(METRICS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(&path, e.to_string()))
}

/// Recomputes the metrics from the stored equity curve and trade log and
/// checks them against the stored report.
pub fn replay(run: &Path) -> Result<MetricsReport> {
    let stored = read_metrics(run)?;
    let equity: Vec<EquityPoint> = read_jsonl(run.join(EQUITY_FILE))?;
    let trades: Vec<TradeRecord> = read_jsonl(run.join(TRADES_FILE))?;
    let curve: Vec<f64> = equity.iter().map(|p| p.equity).collect();
    let recomputed = MetricsReport::from_curve(&curve, trades.len())
        .map_err(|e| Error::data(run.join(EQUITY_FILE), e.to_string()))?;
    match stored.first_difference(&recomputed) {
        None => Ok(recomputed),
        Some((field, stored, recomputed)) => Err(Error::ReplayMismatch { field, stored, recomputed }),
    }
}

/// Filters the stored trajectories of a run into fine-tuning samples.
pub fn export_sft(run: &Path, filter: &crate::datasynth::SftFilter, out: &Path) -> Result<usize> {
    let records: Vec<TrajectoryRecord> = read_jsonl(run.join(TRAJECTORIES_FILE))?;
    let samples = filter_sft(&records, filter);
    write_jsonl(out, &samples)?;
    Ok(samples.len())
}
