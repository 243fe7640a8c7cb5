//! Single-symbol cash account with style-tiered execution.

mod metrics;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use metrics::{
    annualized_volatility, cumulative_return, daily_returns, max_drawdown, sharpe_ratio,
    MetricsReport, Sharpe,
};

use crate::error::{Error, Result};
use crate::risk::TradingStyle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeKind {
    Buy,
    Hold,
    Sell,
}

impl TradeKind {
    pub const ALL: [TradeKind; 3] = [TradeKind::Buy, TradeKind::Hold, TradeKind::Sell];

    pub fn as_str(self) -> &'static str {
        match self {
            TradeKind::Buy => "buy",
            TradeKind::Hold => "hold",
            TradeKind::Sell => "sell",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "buy" => Some(TradeKind::Buy),
            "hold" => Some(TradeKind::Hold),
            "sell" => Some(TradeKind::Sell),
            _ => None,
        }
    }
}

impl std::fmt::Display for TradeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionOrigin {
    Agent,
    ForcedSell,
    TakeProfit,
}

impl ActionOrigin {
    pub fn is_forced(self) -> bool {
        !matches!(self, ActionOrigin::Agent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeAction {
    pub kind: TradeKind,
    pub style: TradingStyle,
    pub origin: ActionOrigin,
}

impl TradeAction {
    pub fn agent(kind: TradeKind, style: TradingStyle) -> Self {
        Self {
            kind,
            style,
            origin: ActionOrigin::Agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub cash: f64,
    pub shares: f64,
    pub avg_entry: Option<f64>,
    pub equity: f64,
}

impl AccountState {
    pub fn new(cash: f64) -> Self {
        Self {
            cash,
            shares: 0.0,
            avg_entry: None,
            equity: cash,
        }
    }

    pub fn marked(&self, price: f64) -> Self {
        Self {
            equity: self.cash + self.shares * price,
            ..self.clone()
        }
    }

    pub fn has_position(&self) -> bool {
        self.shares > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub date: NaiveDate,
    pub action: TradeAction,
    pub fill_price: f64,
    pub quantity: f64,
    pub commission: f64,
    pub post_equity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Executes `action` at `price` and marks the result to the same price.
///
/// Buys spend `style.buy_fraction()` of cash including commission; sells dispose
/// `style.sell_fraction()` of the position, or all of it when the origin is a
/// forced exit. A buy with no cash or a sell with no shares degrades to a hold.
pub fn apply_action(
    state: &AccountState,
    action: TradeAction,
    price: f64,
    commission_rate: f64,
    date: NaiveDate,
) -> Result<(AccountState, TradeRecord)> {
    if !(price > 0.0) || !price.is_finite() {
        return Err(Error::invalid(format!("non-positive fill price {price}")));
    }
    if !(commission_rate >= 0.0) {
        return Err(Error::invalid(format!("negative commission rate {commission_rate}")));
    }
    let mut next = state.clone();
    let mut executed = action;
    let mut quantity = 0.0;
    let mut commission = 0.0;
    let mut note = None;

    match action.kind {
        TradeKind::Buy if state.cash <= 0.0 => {
            executed.kind = TradeKind::Hold;
            note = Some("buy skipped: no cash available".to_string());
        }
        TradeKind::Buy => {
            let budget = action.style.buy_fraction() * state.cash;
            let notional = budget / (1.0 + commission_rate);
            commission = budget - notional;
            quantity = notional / price;
            next.cash = state.cash - notional - commission;
            let held_cost = state.shares * state.avg_entry.unwrap_or(0.0);
            next.shares = state.shares + quantity;
            next.avg_entry = Some((held_cost + quantity * price) / next.shares);
        }
        TradeKind::Sell if state.shares <= 0.0 => {
            executed.kind = TradeKind::Hold;
            note = Some("sell skipped: no position".to_string());
        }
        TradeKind::Sell => {
            let fraction = if action.origin.is_forced() {
                1.0
            } else {
                action.style.sell_fraction()
            };
            quantity = if fraction == 1.0 {
                state.shares
            } else {
                state.shares * fraction
            };
            let notional = quantity * price;
            commission = commission_rate * notional;
            next.cash = state.cash + notional - commission;
            next.shares = state.shares - quantity;
            if next.shares <= 0.0 {
                next.shares = 0.0;
                next.avg_entry = None;
            }
        }
        TradeKind::Hold => {}
    }

    let next = next.marked(price);
    let record = TradeRecord {
        date,
        action: executed,
        fill_price: price,
        quantity,
        commission,
        post_equity: next.equity,
        note,
    };
    Ok((next, record))
}

pub fn unrealized_pnl_pct(state: &AccountState, price: f64) -> Result<f64> {
    match state.avg_entry {
        Some(entry) if state.shares > 0.0 => Ok(price / entry - 1.0),
        _ => Err(Error::invalid("no open position")),
    }
}
