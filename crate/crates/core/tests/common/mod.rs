#![allow(dead_code)]

use std::path::{Path, PathBuf};

use agentbt_core::backtest::{run_backtest_with, BacktestConfig, RunData, RunResult};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_data() -> RunData {
    let f = fixtures();
    RunData::load(&f.join("prices.csv"), Some(&f.join("news.jsonl")), Some(&f.join("reports"))).unwrap()
}

pub fn fixture_config() -> BacktestConfig {
    BacktestConfig::load(fixtures().join("config.toml")).unwrap()
}

pub fn config_with(provider: &str, edit: impl FnOnce(&mut BacktestConfig)) -> BacktestConfig {
    let mut cfg = fixture_config();
    cfg.provider = provider.to_string();
    edit(&mut cfg);
    cfg
}

pub fn run(cfg: &BacktestConfig, data: &RunData) -> RunResult {
    run_backtest_with(cfg, data, &cfg.providers().unwrap()).unwrap()
}

/// Buy-and-hold return (percent) from the close of the first trading day.
pub fn buy_and_hold_pct(data: &RunData) -> f64 {
    let bars = data.prices.bars();
    let first = agentbt_core::backtest::WARMUP_CLOSES;
    (bars[bars.len() - 1].close / bars[first].close - 1.0) * 100.0
}
