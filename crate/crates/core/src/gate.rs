//! Hybrid trend gate: technical rules that override or admit model probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::IndicatorSnapshot;

const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendDirection {
    Up,
    Down,
    Sideways,
}

impl TrendDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            TrendDirection::Up => "up",
            TrendDirection::Down => "down",
            TrendDirection::Sideways => "sideways",
        }
    }
}

impl std::fmt::Display for TrendDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendProbabilities {
    pub p_up: f64,
    pub p_down: f64,
    pub p_side: f64,
}

impl TrendProbabilities {
    pub fn new(p_up: f64, p_down: f64, p_side: f64) -> Result<Self> {
        let probs = Self { p_up, p_down, p_side };
        probs.validate()?;
        Ok(probs)
    }

    pub fn uniform() -> Self {
        Self {
            p_up: 1.0 / 3.0,
            p_down: 1.0 / 3.0,
            p_side: 1.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.p_up, self.p_down, self.p_side];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!("probability out of [0,1]: {self:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn of(&self, direction: TrendDirection) -> f64 {
        match direction {
            TrendDirection::Up => self.p_up,
            TrendDirection::Down => self.p_down,
            TrendDirection::Sideways => self.p_side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatePath {
    HardIntercept,
    SoftPassUp,
    SoftPassDown,
    DefaultSideways,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendLabel {
    pub label: TrendDirection,
    pub path: GatePath,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub rsi_overheat: f64,
    pub up_prob_threshold: f64,
    pub down_prob_threshold: f64,
    pub atr_breakout_coeff: f64,
    pub breakout_floor_pct: f64,
    /// Healthy pullback: SMA-20 distance within this band (percent).
    pub pullback_sma_min_pct: f64,
    pub pullback_sma_max_pct: f64,
    pub pullback_rsi_max: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            rsi_overheat: 70.0,
            up_prob_threshold: 0.55,
            down_prob_threshold: 0.55,
            atr_breakout_coeff: 0.5,
            breakout_floor_pct: 1.0,
            pullback_sma_min_pct: -3.0,
            pullback_sma_max_pct: 0.0,
            pullback_rsi_max: 40.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.up_prob_threshold) || !open_unit(self.down_prob_threshold) {
            return Err(Error::Config("gate probability thresholds must lie in (0,1)".into()));
        }
        if !(self.rsi_overheat > 0.0 && self.rsi_overheat < 100.0) {
            return Err(Error::Config("gate.rsi_overheat must lie in (0,100)".into()));
        }
        if self.atr_breakout_coeff < 0.0 || self.breakout_floor_pct < 0.0 {
            return Err(Error::Config("gate breakout parameters must be non-negative".into()));
        }
        if self.pullback_sma_min_pct > self.pullback_sma_max_pct {
            return Err(Error::Config("gate pullback band is empty".into()));
        }
        Ok(())
    }

    /// Percent move separating a mere approach to the 20-day high from a valid breakout.
    pub fn breakout_threshold(&self, atr20s_pct: f64) -> Result<f64> {
        if !(atr20s_pct >= 0.0) {
            return Err(Error::invalid(format!("negative ATR {atr20s_pct}")));
        }
        Ok(self.breakout_floor_pct.max(self.atr_breakout_coeff * atr20s_pct))
    }
}

/// Breakout threshold under the default gate parameters.
pub fn breakout_threshold(atr20s_pct: f64) -> Result<f64> {
    GateConfig::default().breakout_threshold(atr20s_pct)
}

pub fn classify_trend(
    probs: &TrendProbabilities,
    snap: &IndicatorSnapshot,
    cfg: &GateConfig,
) -> Result<TrendLabel> {
    probs.validate()?;
    let threshold = cfg.breakout_threshold(snap.atr20s_pct)?;
    let gap = snap.dist_high20_pct.abs();

    if snap.rsi14 > cfg.rsi_overheat && gap > threshold {
        return Ok(TrendLabel {
            label: TrendDirection::Sideways,
            path: GatePath::HardIntercept,
            reason: format!(
                "RSI {:.2} above {:.0} while {:.2}% from the 20-day high exceeds breakout threshold {:.2}%",
                snap.rsi14, cfg.rsi_overheat, gap, threshold
            ),
        });
    }

    let breakout = snap.new_high20 || gap <= threshold;
    let pullback = (cfg.pullback_sma_min_pct..=cfg.pullback_sma_max_pct)
        .contains(&snap.dist_sma20_pct)
        && snap.rsi14 < cfg.pullback_rsi_max;

    if probs.p_up > cfg.up_prob_threshold && (breakout || pullback) {
        let pattern = match (breakout, pullback) {
            (true, true) => "breakout and healthy pullback",
            (true, false) => "valid or near breakout",
            _ => "healthy pullback",
        };
        return Ok(TrendLabel {
            label: TrendDirection::Up,
            path: GatePath::SoftPassUp,
            reason: format!("p_up {:.3} with {pattern}", probs.p_up),
        });
    }

    if probs.p_down > cfg.down_prob_threshold {
        return Ok(TrendLabel {
            label: TrendDirection::Down,
            path: GatePath::SoftPassDown,
            reason: format!("p_down {:.3} above {:.2}", probs.p_down, cfg.down_prob_threshold),
        });
    }

    Ok(TrendLabel {
        label: TrendDirection::Sideways,
        path: GatePath::DefaultSideways,
        reason: "no rule admitted a directional call".to_string(),
    })
}
