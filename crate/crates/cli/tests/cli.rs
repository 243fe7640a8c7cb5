use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn agentbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentbt")).args(args).env_remove("AGENTBT_TEST_KEY").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn run_fixture(config: &Path, out: &Path) -> Output {
    let f = fixtures();
    agentbt(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--prices",
        f.join("prices.csv").to_str().unwrap(),
        "--news",
        f.join("news.jsonl").to_str().unwrap(),
        "--reports",
        f.join("reports").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&agentbt(&["--help"])), 0);
    assert_eq!(code(&agentbt(&["run", "--help"])), 0);
    assert_eq!(code(&agentbt(&[])), 1);
    assert_eq!(code(&agentbt(&["frobnicate"])), 1);
    assert_eq!(code(&agentbt(&["run", "--config", "x.toml"])), 1);
}

#[test]
fn run_metrics_replay_export() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let out = run_fixture(&fixtures().join("config.toml"), &run);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(printed["cr_pct"].is_number());

    let metrics = agentbt(&["metrics", "--run", run.to_str().unwrap()]);
    assert_eq!(code(&metrics), 0);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&metrics.stdout).unwrap(), printed);

    assert_eq!(code(&agentbt(&["replay", "--run", run.to_str().unwrap()])), 0);

    let sft = tmp.path().join("sft.jsonl");
    let export = agentbt(&["export-sft", "--run", run.to_str().unwrap(), "--out", sft.to_str().unwrap()]);
    assert_eq!(code(&export), 0);
    assert_eq!(std::fs::read(&sft).unwrap(), std::fs::read(run.join("sft.jsonl")).unwrap());

    // a stricter threshold never yields more samples
    let strict = tmp.path().join("strict.jsonl");
    let args = ["export-sft", "--run", run.to_str().unwrap(), "--out", strict.to_str().unwrap(), "--min-whit", "0.9", "--min-reward", "0.01"];
    assert_eq!(code(&agentbt(&args)), 0);
    let lines = |p: &Path| std::fs::read_to_string(p).unwrap().lines().count();
    assert!(lines(&strict) <= lines(&sft));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "symbol = \"ACME\"\nprovider = \"stub:sideways\"\ncommission_rate = 2.0\n").unwrap();
    assert_eq!(code(&run_fixture(&bad, &tmp.path().join("a"))), 1);
    assert_eq!(code(&run_fixture(&tmp.path().join("missing.toml"), &tmp.path().join("b"))), 1);

    let keyless = tmp.path().join("http.toml");
    std::fs::write(
        &keyless,
        "symbol = \"ACME\"\nprovider = \"http\"\n[http]\napi_key_env = \"AGENTBT_TEST_KEY\"\n[http.chat]\nurl = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\n",
    )
    .unwrap();
    assert_eq!(code(&run_fixture(&keyless, &tmp.path().join("c"))), 3);

    // data and artifact problems
    assert_eq!(code(&agentbt(&["metrics", "--run", tmp.path().join("nowhere").to_str().unwrap()])), 2);
    let run = tmp.path().join("run");
    assert_eq!(code(&run_fixture(&fixtures().join("config.toml"), &run)), 0);
    let equity = run.join("equity.jsonl");
    let text = std::fs::read_to_string(&equity).unwrap();
    std::fs::write(&equity, text.replacen("\"equity\":100000.0", "\"equity\":100001.0", 1)).unwrap();
    assert_eq!(code(&agentbt(&["replay", "--run", run.to_str().unwrap()])), 2);
}
