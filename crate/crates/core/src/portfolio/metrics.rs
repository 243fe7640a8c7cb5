//! CR / SPR / MDD / AV over a daily equity curve.
//!
//! Returns are daily simple returns, moments are population moments,
//! annualization uses 252 trading days and the risk-free rate is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::TRADING_DAYS_PER_YEAR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub cr_pct: f64,
    pub sharpe: f64,
    pub mdd_pct: f64,
    pub av_pct: f64,
    pub n_trades: usize,
    pub degenerate_sharpe: bool,
}

impl MetricsReport {
    pub fn from_curve(equity: &[f64], n_trades: usize) -> Result<Self> {
        let sharpe = sharpe_ratio(equity)?;
        Ok(Self {
            cr_pct: cumulative_return(equity)?,
            sharpe: sharpe.value,
            mdd_pct: max_drawdown(equity)?,
            av_pct: annualized_volatility(equity)?,
            n_trades,
            degenerate_sharpe: sharpe.degenerate,
        })
    }

    /// First field that differs from `other`, as `(name, self, other)`.
    pub fn first_difference(&self, other: &Self) -> Option<(&'static str, String, String)> {
        let floats = [
            ("cr_pct", self.cr_pct, other.cr_pct),
            ("sharpe", self.sharpe, other.sharpe),
            ("mdd_pct", self.mdd_pct, other.mdd_pct),
            ("av_pct", self.av_pct, other.av_pct),
        ];
        for (name, a, b) in floats {
            if a.to_bits() != b.to_bits() {
                return Some((name, a.to_string(), b.to_string()));
            }
        }
        if self.n_trades != other.n_trades {
            return Some(("n_trades", self.n_trades.to_string(), other.n_trades.to_string()));
        }
        if self.degenerate_sharpe != other.degenerate_sharpe {
            return Some((
                "degenerate_sharpe",
                self.degenerate_sharpe.to_string(),
                other.degenerate_sharpe.to_string(),
            ));
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sharpe {
    pub value: f64,
    /// Set when the return stddev is exactly zero; `value` is then 0.
    pub degenerate: bool,
}

fn check_curve(equity: &[f64], min_len: usize) -> Result<()> {
    if equity.len() < min_len {
        return Err(Error::invalid(format!(
            "equity curve needs at least {min_len} points, got {}",
            equity.len()
        )));
    }
    if let Some(bad) = equity.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid(format!("non-positive equity value {bad}")));
    }
    Ok(())
}

pub fn daily_returns(equity: &[f64]) -> Vec<f64> {
    equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cumulative_return(equity: &[f64]) -> Result<f64> {
    check_curve(equity, 1)?;
    Ok(100.0 * (equity[equity.len() - 1] / equity[0] - 1.0))
}

pub fn sharpe_ratio(equity: &[f64]) -> Result<Sharpe> {
    check_curve(equity, 3)?;
    let (mean, std) = mean_std(&daily_returns(equity));
    if std == 0.0 {
        return Ok(Sharpe {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Sharpe {
        value: mean / std * TRADING_DAYS_PER_YEAR.sqrt(),
        degenerate: false,
    })
}

/// Deepest peak-to-trough decline in percent (≤ 0).
pub fn max_drawdown(equity: &[f64]) -> Result<f64> {
    check_curve(equity, 1)?;
    let mut peak = equity[0];
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.min(e / peak - 1.0);
    }
    Ok(100.0 * worst)
}

pub fn annualized_volatility(equity: &[f64]) -> Result<f64> {
    check_curve(equity, 3)?;
    let (_, std) = mean_std(&daily_returns(equity));
    Ok(100.0 * std * TRADING_DAYS_PER_YEAR.sqrt())
}
