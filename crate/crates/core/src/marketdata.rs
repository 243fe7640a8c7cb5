//! Daily close series and the technical factors computed from them.
//!
//! Every factor is a pure function of the closes at or before the requested
//! date. Rolling windows include the current day's close.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

const RSI_PERIOD: usize = 14;
const SMA_WINDOW: usize = 20;
const HV_WINDOW: usize = 10;
const ATR_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub close: f64,
}

/// Validated, date-ordered close series for a single symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    bars: Vec<PriceBar>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(bars: Vec<PriceBar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::invalid("price series is empty"));
        }
        for (i, bar) in bars.iter().enumerate() {
            if !(bar.close > 0.0) || !bar.close.is_finite() {
                return Err(Error::invalid(format!(
                    "non-positive price {} on {}",
                    bar.close, bar.date
                )));
            }
            if i > 0 {
                let prev = bars[i - 1].date;
                if bar.date == prev {
                    return Err(Error::invalid(format!("duplicate date {}", bar.date)));
                }
                if bar.date < prev {
                    return Err(Error::invalid(format!(
                        "dates not increasing: {} after {}",
                        bar.date, prev
                    )));
                }
            }
        }
        let closes = bars.iter().map(|b| b.close).collect();
        Ok(Self { bars, closes })
    }

    /// Builds a series on consecutive weekdays starting at `start`.
    pub fn from_closes(start: NaiveDate, closes: &[f64]) -> Result<Self> {
        let mut date = start;
        let mut bars = Vec::with_capacity(closes.len());
        for &close in closes {
            while is_weekend(date) {
                date = date.succ_opt().expect("date overflow");
            }
            bars.push(PriceBar { date, close });
            date = date.succ_opt().expect("date overflow");
        }
        Self::new(bars)
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Index of the last bar dated at or before `at`.
    pub fn index_at(&self, at: NaiveDate) -> Option<usize> {
        let n = self.bars.partition_point(|b| b.date <= at);
        n.checked_sub(1)
    }

    /// Index of the bar dated exactly `at`.
    pub fn position(&self, at: NaiveDate) -> Option<usize> {
        self.bars.binary_search_by_key(&at, |b| b.date).ok()
    }

    /// Close of the bar dated exactly `at`.
    pub fn close_at(&self, at: NaiveDate) -> Option<f64> {
        self.position(at).map(|i| self.closes[i])
    }

    /// Closes from the start of the series up to and including `at`.
    pub fn closes_upto(&self, at: NaiveDate) -> &[f64] {
        match self.index_at(at) {
            Some(i) => &self.closes[..=i],
            None => &[],
        }
    }

    /// Keeps only bars dated at or before `at`.
    pub fn truncated(&self, at: NaiveDate) -> Result<Self> {
        let end = self.index_at(at).map_or(0, |i| i + 1);
        Self::new(self.bars[..end].to_vec())
    }
}

fn is_weekend(date: NaiveDate) -> bool {
    use chrono::Datelike;
    matches!(date.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    date: String,
    close: String,
}

/// Reads a `date,close` CSV. Extra columns are ignored.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut bars: Vec<PriceBar> = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::data(path, format!("line {line}: {e}")))?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| Error::data(path, format!("line {line}: bad date `{}`: {e}", row.date)))?;
        let close: f64 = row
            .close
            .parse()
            .map_err(|e| Error::data(path, format!("line {line}: bad close `{}`: {e}", row.close)))?;
        if !(close > 0.0) || !close.is_finite() {
            return Err(Error::data(path, format!("line {line}: non-positive price {close}")));
        }
        if let Some(prev) = bars.last() {
            if date == prev.date {
                return Err(Error::data(path, format!("line {line}: duplicate date {date}")));
            }
            if date < prev.date {
                return Err(Error::data(
                    path,
                    format!("line {line}: dates not increasing ({date} after {})", prev.date),
                ));
            }
        }
        bars.push(PriceBar { date, close });
    }
    PriceSeries::new(bars).map_err(|e| Error::data(path, e.to_string()))
}

fn require(closes: &[f64], need: usize) -> Result<()> {
    if closes.len() < need {
        Err(Error::InsufficientHistory {
            need,
            have: closes.len(),
        })
    } else {
        Ok(())
    }
}

/// Log returns of the last `n` steps of `closes` (needs `n + 1` closes).
fn trailing_log_returns(closes: &[f64], n: usize) -> impl Iterator<Item = f64> + '_ {
    let start = closes.len() - n - 1;
    closes[start..].windows(2).map(|w| (w[1] / w[0]).ln())
}

/// Population standard deviation of the last `n` log returns, unannualized.
pub(crate) fn log_return_std(closes: &[f64], n: usize) -> Result<f64> {
    require(closes, n + 1)?;
    let mean = trailing_log_returns(closes, n).sum::<f64>() / n as f64;
    let var = trailing_log_returns(closes, n)
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / n as f64;
    Ok(var.sqrt())
}

pub(crate) fn mean_abs_log_return(closes: &[f64], n: usize) -> Result<f64> {
    require(closes, n + 1)?;
    Ok(trailing_log_returns(closes, n).map(f64::abs).sum::<f64>() / n as f64)
}

fn rsi_from_closes(closes: &[f64]) -> Result<f64> {
    require(closes, RSI_PERIOD + 1)?;
    let period = RSI_PERIOD as f64;
    let mut changes = closes.windows(2).map(|w| w[1] - w[0]);

    let (mut avg_gain, mut avg_loss) = (0.0, 0.0);
    for change in changes.by_ref().take(RSI_PERIOD) {
        if change > 0.0 {
            avg_gain += change;
        } else {
            avg_loss -= change;
        }
    }
    avg_gain /= period;
    avg_loss /= period;

    for change in changes {
        let (gain, loss) = if change > 0.0 { (change, 0.0) } else { (0.0, -change) };
        avg_gain = (avg_gain * (period - 1.0) + gain) / period;
        avg_loss = (avg_loss * (period - 1.0) + loss) / period;
    }

    Ok(match (avg_gain == 0.0, avg_loss == 0.0) {
        (true, true) => 50.0,
        (_, true) => 100.0,
        (true, false) => 0.0,
        _ => 100.0 - 100.0 / (1.0 + avg_gain / avg_loss),
    })
}

/// Wilder-smoothed 14-period RSI over all closes up to `at`.
pub fn rsi14(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    rsi_from_closes(series.closes_upto(at))
}

pub fn dist_sma20_pct(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    let closes = series.closes_upto(at);
    require(closes, SMA_WINDOW)?;
    let window = &closes[closes.len() - SMA_WINDOW..];
    let sma = window.iter().sum::<f64>() / SMA_WINDOW as f64;
    Ok(100.0 * (closes[closes.len() - 1] / sma - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    High,
    Low,
}

fn window20(series: &PriceSeries, at: NaiveDate) -> Result<&[f64]> {
    let closes = series.closes_upto(at);
    require(closes, SMA_WINDOW)?;
    Ok(&closes[closes.len() - SMA_WINDOW..])
}

/// Signed percent distance from the 20-close high or low.
pub fn dist_extreme20_pct(series: &PriceSeries, at: NaiveDate, side: Extreme) -> Result<f64> {
    let window = window20(series, at)?;
    let current = window[SMA_WINDOW - 1];
    let extreme = match side {
        Extreme::High => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Extreme::Low => window.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(100.0 * (current / extreme - 1.0))
}

/// True iff today's close is the strict extreme of the 20-close window.
pub fn extreme_flag20(series: &PriceSeries, at: NaiveDate, side: Extreme) -> Result<bool> {
    let window = window20(series, at)?;
    let (current, rest) = window.split_last().expect("window is non-empty");
    Ok(match side {
        Extreme::High => rest.iter().all(|&c| current > &c),
        Extreme::Low => rest.iter().all(|&c| current < &c),
    })
}

/// 10-day historical volatility of log returns, annualized, in percent.
pub fn hv10_pct(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    let sigma = log_return_std(series.closes_upto(at), HV_WINDOW)?;
    Ok(100.0 * sigma * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Close-to-close simplified ATR: stddev of the last 20 log returns, in percent.
pub fn atr20s_pct(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    Ok(100.0 * log_return_std(series.closes_upto(at), ATR_WINDOW)?)
}

pub fn mean_log_return20(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    let closes = series.closes_upto(at);
    require(closes, ATR_WINDOW + 1)?;
    Ok(trailing_log_returns(closes, ATR_WINDOW).sum::<f64>() / ATR_WINDOW as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSnapshot {
    pub date: NaiveDate,
    pub close: f64,
    pub rsi14: f64,
    pub dist_sma20_pct: f64,
    pub dist_high20_pct: f64,
    pub dist_low20_pct: f64,
    pub new_high20: bool,
    pub new_low20: bool,
    pub hv10_pct: f64,
    pub atr20s_pct: f64,
    pub mean_log_return20: f64,
}

pub const SNAPSHOT_MIN_CLOSES: usize = ATR_WINDOW + 1;

pub fn build_snapshot(series: &PriceSeries, at: NaiveDate) -> Result<IndicatorSnapshot> {
    let closes = series.closes_upto(at);
    require(closes, SNAPSHOT_MIN_CLOSES)?;
    let date = series.bars()[closes.len() - 1].date;
    Ok(IndicatorSnapshot {
        date,
        close: closes[closes.len() - 1],
        rsi14: rsi14(series, at)?,
        dist_sma20_pct: dist_sma20_pct(series, at)?,
        dist_high20_pct: dist_extreme20_pct(series, at, Extreme::High)?,
        dist_low20_pct: dist_extreme20_pct(series, at, Extreme::Low)?,
        new_high20: extreme_flag20(series, at, Extreme::High)?,
        new_low20: extreme_flag20(series, at, Extreme::Low)?,
        hv10_pct: hv10_pct(series, at)?,
        atr20s_pct: atr20s_pct(series, at)?,
        mean_log_return20: mean_log_return20(series, at)?,
    })
}
