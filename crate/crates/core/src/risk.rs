//! Style-tiered stop-loss / take-profit thresholds and the daily position check.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{log_return_std, PriceSeries};

const SIGMA_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradingStyle {
    Aggressive,
    #[default]
    Balanced,
    Conservative,
}

impl TradingStyle {
    pub const ALL: [TradingStyle; 3] = [
        TradingStyle::Aggressive,
        TradingStyle::Balanced,
        TradingStyle::Conservative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TradingStyle::Aggressive => "aggressive",
            TradingStyle::Balanced => "balanced",
            TradingStyle::Conservative => "conservative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aggressive" => Some(TradingStyle::Aggressive),
            "balanced" => Some(TradingStyle::Balanced),
            "conservative" => Some(TradingStyle::Conservative),
            _ => None,
        }
    }

    /// Fraction of available cash committed by a buy.
    pub fn buy_fraction(self) -> f64 {
        match self {
            TradingStyle::Aggressive | TradingStyle::Balanced => 1.0,
            TradingStyle::Conservative => 0.5,
        }
    }

    /// Fraction of held shares disposed by an agent-initiated sell.
    pub fn sell_fraction(self) -> f64 {
        match self {
            TradingStyle::Aggressive => 0.5,
            TradingStyle::Balanced | TradingStyle::Conservative => 1.0,
        }
    }
}

impl std::fmt::Display for TradingStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multipliers {
    pub sl: f64,
    pub tp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    pub aggressive: Multipliers,
    pub balanced: Multipliers,
    pub conservative: Multipliers,
    /// Lower bound applied to both thresholds.
    pub floor: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            aggressive: Multipliers { sl: 2.0, tp: 3.0 },
            balanced: Multipliers { sl: 1.5, tp: 2.5 },
            conservative: Multipliers { sl: 1.0, tp: 2.0 },
            floor: 0.005,
        }
    }
}

impl RiskConfig {
    pub fn multipliers(&self, style: TradingStyle) -> Multipliers {
        match style {
            TradingStyle::Aggressive => self.aggressive,
            TradingStyle::Balanced => self.balanced,
            TradingStyle::Conservative => self.conservative,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for style in TradingStyle::ALL {
            let m = self.multipliers(style);
            if !(m.sl > 0.0 && m.tp > m.sl) {
                return Err(Error::Config(format!(
                    "risk.{style}: need tp > sl > 0, got sl={} tp={}",
                    m.sl, m.tp
                )));
            }
        }
        if !(self.floor >= 0.0) {
            return Err(Error::Config("risk.floor must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    pub sigma_d10: f64,
    pub t_sl: f64,
    pub t_tp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskAction {
    None,
    ForcedSell,
    TakeProfit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskVerdict {
    pub action: RiskAction,
    pub trigger_pnl: f64,
}

/// Unannualized population stddev of the last 10 daily log returns.
pub fn sigma_d10(series: &PriceSeries, at: NaiveDate) -> Result<f64> {
    log_return_std(series.closes_upto(at), SIGMA_WINDOW)
}

pub fn thresholds_from_sigma(sigma: f64, style: TradingStyle, cfg: &RiskConfig) -> RiskThresholds {
    let m = cfg.multipliers(style);
    RiskThresholds {
        sigma_d10: sigma,
        t_sl: (m.sl * sigma).max(cfg.floor),
        t_tp: (m.tp * sigma).max(cfg.floor),
    }
}

pub fn compute_thresholds(
    style: TradingStyle,
    series: &PriceSeries,
    at: NaiveDate,
    cfg: &RiskConfig,
) -> Result<RiskThresholds> {
    Ok(thresholds_from_sigma(sigma_d10(series, at)?, style, cfg))
}

pub fn evaluate_position(pnl_pct: f64, th: &RiskThresholds) -> RiskVerdict {
    let stop = pnl_pct <= -th.t_sl;
    let take = pnl_pct >= th.t_tp;
    let action = match (stop, take) {
        (true, false) => RiskAction::ForcedSell,
        (false, true) => RiskAction::TakeProfit,
        // both only at pnl = 0 with zero thresholds
        _ => RiskAction::None,
    };
    RiskVerdict {
        action,
        trigger_pnl: pnl_pct,
    }
}
