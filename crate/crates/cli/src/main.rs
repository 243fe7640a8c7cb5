use std::path::PathBuf;
use std::process::ExitCode;

use agentbt_core::backtest::{self, BacktestConfig};
use agentbt_core::datasynth::SftFilter;
use agentbt_core::Error;
use clap::{Parser, Subcommand};

/// Multi-agent daily-bar backtester.
#[derive(Debug, Parser)]
#[command(name = "agentbt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a backtest and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        news: Option<PathBuf>,
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the stored metrics of a run.
    Metrics {
        #[arg(long)]
        run: PathBuf,
    },
    /// Export fine-tuning samples from a run's trajectories.
    ExportSft {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_reward: f64,
        #[arg(long, default_value_t = 0.3)]
        min_whit: f64,
    },
    /// Recompute metrics from the equity curve and compare with the stored report.
    Replay {
        #[arg(long)]
        run: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, prices, news, reports, out } => {
            let cfg = BacktestConfig::load(&config)?;
            let art = backtest::run_backtest(&cfg, &prices, news.as_deref(), reports.as_deref(), &out)?;
            println!("{}", serde_json::to_string_pretty(&art.metrics)?);
            eprintln!("artifacts written to {}", art.dir.display());
        }
        Command::Metrics { run } => {
            println!("{}", serde_json::to_string_pretty(&backtest::read_metrics(&run)?)?);
        }
        Command::ExportSft { run, out, min_reward, min_whit } => {
            let n = backtest::export_sft(&run, &SftFilter { min_reward, whit_min: min_whit }, &out)?;
            eprintln!("{n} samples written to {}", out.display());
        }
        Command::Replay { run } => {
            let m = backtest::replay(&run)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            eprintln!("replay matches stored metrics");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
