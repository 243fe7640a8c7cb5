//! Multi-agent daily-bar backtester.
//!
//! Five chat-driven agents (news sentiment, filing analysis, trend forecast,
//! trading style, trade decision) run once per trading day. A rule gate
//! constrains the trend forecast, a volatility-scaled risk monitor can
//! override the decision, and every agent exchange is logged and later
//! labeled against realized prices for supervised fine-tuning export.

pub mod agents;
pub mod backtest;
pub mod datasynth;
pub mod error;
pub mod gate;
pub mod marketdata;
pub mod portfolio;
pub mod retrieval;
pub mod risk;

pub use error::{Error, ProviderError, Result};
