mod common;

use std::collections::BTreeSet;

use agentbt_core::agents::AgentName;
use agentbt_core::backtest::{self, replay, write_artifacts, EquityPoint, WARMUP_CLOSES};
use agentbt_core::datasynth::{read_jsonl, TrajectoryRecord};
use agentbt_core::error::Error;
use agentbt_core::marketdata::{PriceBar, PriceSeries};
use agentbt_core::portfolio::{ActionOrigin, TradeKind};
use agentbt_core::retrieval::NewsItem;
use common::*;

#[test]
fn sideways_never_trades() {
    let data = fixture_data();
    let r = run(&config_with("stub:sideways", |_| {}), &data);
    assert!(r.trades.is_empty());
    assert_eq!(r.metrics.cr_pct, 0.0);
    assert_eq!(r.metrics.mdd_pct, 0.0);
    assert_eq!(r.metrics.n_trades, 0);
}

#[test]
fn one_record_per_agent_per_day() {
    let data = fixture_data();
    let r = run(&fixture_config(), &data);
    let days = data.prices.len() - WARMUP_CLOSES;
    assert_eq!(r.trajectories.len(), days * AgentName::ALL.len());
    assert_eq!(r.equity.len(), days + 1);
    for (i, rec) in r.trajectories.iter().enumerate() {
        assert_eq!(rec.agent_name, AgentName::ALL[i % 5]);
        let labeled = rec.labels.is_some();
        let expect = matches!(rec.agent_name, AgentName::Forecast | AgentName::Decision) && i < r.trajectories.len() - 5;
        assert_eq!(labeled, expect, "record {i}");
    }
}

#[test]
fn decision_echoes_gated_forecast() {
    let data = fixture_data();
    let r = run(&config_with("stub:echo-forecast", |_| {}), &data);
    let mut seen = BTreeSet::new();
    for day in r.trajectories.chunks(5) {
        let label = day[2].parsed["gated"]["label"].as_str().unwrap().to_string();
        let action = day[4].parsed["action"].as_str().unwrap();
        let expected = match label.as_str() {
            "up" => "buy",
            "down" => "sell",
            _ => "hold",
        };
        assert_eq!(action, expected, "{}", day[4].date);
        seen.insert(label);
    }
    assert!(seen.len() >= 2, "fixture should exercise more than one label: {seen:?}");
}

#[test]
fn forced_exits_override_the_agent() {
    let data = fixture_data();
    let r = run(&config_with("stub:always-up", |c| c.features.risk_management = true), &data);
    let forced: Vec<_> = r.trades.iter().filter(|t| t.action.origin.is_forced()).collect();
    assert!(!forced.is_empty());
    for t in forced {
        assert_eq!(t.action.kind, TradeKind::Sell);
        // the agent still decided (always buy) and was logged, not executed
        let decision = r
            .trajectories
            .iter()
            .find(|rec| rec.date == t.date && rec.agent_name == AgentName::Decision)
            .unwrap();
        assert_eq!(decision.parsed["action"], "buy");
    }
}

fn perturbed_future(data: &backtest::RunData, cutoff: usize) -> backtest::RunData {
    let bars: Vec<PriceBar> = data
        .prices
        .bars()
        .iter()
        .enumerate()
        .map(|(i, b)| PriceBar { date: b.date, close: if i > cutoff { b.close * (1.0 + 0.03 * ((i % 5) as f64 - 2.0)) } else { b.close } })
        .collect();
    let cut_date = data.prices.bars()[cutoff].date;
    let mut news: Vec<NewsItem> = data.news.iter().filter(|n| n.date <= cut_date).cloned().collect();
    news.push(NewsItem { date: cut_date.succ_opt().unwrap(), title: "Acme bankruptcy rumor".into(), body: "Profit warning and lawsuit.".into() });
    backtest::RunData { prices: PriceSeries::new(bars).unwrap(), news, reports: data.reports.clone() }
}

#[test]
fn future_data_does_not_leak() {
    let data = fixture_data();
    let cutoff = 45;
    let cut_date = data.prices.bars()[cutoff].date;
    let other = perturbed_future(&data, cutoff);
    for provider in ["stub:echo-forecast", "stub:always-up"] {
        let cfg = config_with(provider, |_| {});
        let (a, b) = (run(&cfg, &data), run(&cfg, &other));
        let early = |recs: &[TrajectoryRecord]| -> Vec<TrajectoryRecord> {
            recs.iter()
                .filter(|r| r.date <= cut_date)
                .cloned()
                .map(|mut r| {
                    if r.date == cut_date {
                        r.labels = None;
                    }
                    r
                })
                .collect()
        };
        assert_eq!(early(&a.trajectories), early(&b.trajectories), "{provider}");
        let upto = |pts: &[EquityPoint]| pts.iter().filter(|p| p.date <= cut_date).cloned().collect::<Vec<_>>();
        assert_eq!(upto(&a.equity), upto(&b.equity));
        let trades = |r: &backtest::RunResult| r.trades.iter().filter(|t| t.date <= cut_date).cloned().collect::<Vec<_>>();
        assert_eq!(trades(&a), trades(&b));
        // sanity: the perturbation does change later days
        assert_ne!(a.equity.last(), b.equity.last());
    }
}

#[test]
fn truncated_run_reproduces_prefix() {
    let data = fixture_data();
    let cfg = fixture_config();
    let full = run(&cfg, &data);
    let end = data.prices.bars()[50].date;
    let short = run(&config_with(&cfg.provider, |c| c.end = Some(end)), &data);
    let n = short.trajectories.len();
    for (a, b) in full.trajectories[..n - 5].iter().zip(&short.trajectories[..n - 5]) {
        assert_eq!(a, b);
    }
    assert!(short.trajectories[n - 5..].iter().all(|r| r.labels.is_none()));
    assert_eq!(&full.equity[..short.equity.len()], &short.equity[..]);
}

#[test]
fn replay_detects_tampering() {
    let data = fixture_data();
    let cfg = fixture_config();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(&cfg, &run(&cfg, &data), dir.path()).unwrap();
    let stored = backtest::read_metrics(dir.path()).unwrap();
    assert_eq!(replay(dir.path()).unwrap(), stored);

    let equity_path = dir.path().join(backtest::EQUITY_FILE);
    let original = std::fs::read_to_string(&equity_path).unwrap();

    let mut points: Vec<EquityPoint> = read_jsonl(&equity_path).unwrap();
    points[10].equity *= 1.001;
    let edited: String = points.iter().map(|p| serde_json::to_string(p).unwrap() + "\n").collect();
    std::fs::write(&equity_path, edited).unwrap();
    match replay(dir.path()) {
        Err(Error::ReplayMismatch { field, .. }) => assert!(["cr_pct", "sharpe", "mdd_pct", "av_pct"].contains(&field)),
        other => panic!("expected mismatch, got {other:?}"),
    }

    let cut = original.len() / 2;
    std::fs::write(&equity_path, &original[..cut]).unwrap();
    assert!(replay(dir.path()).is_err());

    std::fs::remove_file(&equity_path).unwrap();
    assert!(matches!(replay(dir.path()), Err(Error::Io { .. })));
}

#[test]
fn warmup_is_enforced() {
    let data = fixture_data();
    let early = data.prices.bars()[WARMUP_CLOSES - 1].date;
    let cfg = config_with("stub:sideways", |c| c.start = Some(early));
    let err = backtest::run_backtest_with(&cfg, &data, &cfg.providers().unwrap()).unwrap_err();
    assert!(matches!(err, Error::InsufficientHistory { .. }));
    let missing = config_with("stub:sideways", |c| c.end = Some(chrono::NaiveDate::from_ymd_opt(2030, 1, 1).unwrap()));
    assert!(backtest::run_backtest_with(&missing, &data, &missing.providers().unwrap()).is_err());
}

#[test]
fn other_symbols_filing_is_never_used() {
    let data = fixture_data();
    let r = run(&fixture_config(), &data);
    for rec in r.trajectories.iter().filter(|r| r.agent_name == AgentName::Report) {
        assert!(!rec.input_text.contains("Other Inc"));
        if let Some(doc) = rec.parsed["doc_id"].as_str() {
            assert!(doc.starts_with("acme_"));
        }
    }
    // the quarterly filing only appears once it is public
    let q1_date = data.reports.entries().iter().find(|e| e.doc_id == "acme_2024_q1.txt").unwrap().date;
    for rec in r.trajectories.iter().filter(|r| r.agent_name == AgentName::Report) {
        let uses_q1 = rec.parsed["doc_id"] == "acme_2024_q1.txt";
        assert_eq!(uses_q1, rec.date >= q1_date, "{}", rec.date);
    }
}

#[test]
fn provider_failures_never_abort_a_day() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.jsonl");
    let lines = [
        r#"{"agent":"forecast","content":"no json here"}"#,
        r#"{"agent":"decision","error":true}"#,
        r#"{"agent":"style","content":"{\"style\":\"reckless\",\"confidence\":2}"}"#,
        r#"{"agent":"news","error":true}"#,
        r#"{"agent":"report","content":"{\"indicators\":[{\"name\":\"x\",\"value\":1,\"chunk\":4242}]}"}"#,
    ];
    std::fs::write(&script, lines.join("\n")).unwrap();
    let data = fixture_data();
    let cfg = config_with(&format!("stub:scripted:{}", script.display()), |_| {});
    let r = run(&cfg, &data);
    assert_eq!(r.trajectories.len(), (data.prices.len() - WARMUP_CLOSES) * 5);
    for rec in &r.trajectories {
        match rec.agent_name {
            AgentName::Decision => assert_eq!(rec.parsed["action"], "hold"),
            AgentName::Forecast => assert_eq!(rec.parsed["gated"]["label"], "sideways"),
            AgentName::Style => assert_eq!(rec.parsed["style"], "balanced"),
            _ => {}
        }
        if matches!(rec.agent_name, AgentName::Decision | AgentName::Forecast | AgentName::Style) {
            assert!(!rec.flags.is_empty());
        }
    }
    assert!(r.trades.iter().all(|t| t.action.origin != ActionOrigin::Agent || t.action.kind != TradeKind::Buy));
}
