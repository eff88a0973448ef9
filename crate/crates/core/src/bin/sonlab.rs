use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sonlab::harness::{self, ExperimentConfig, HarnessError, Method};

#[derive(Parser)]
#[command(name = "sonlab", version, about = "Mobility robustness optimisation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulator with default parameters and write KPI traces.
    Simulate(Common),
    /// Train and evaluate one method.
    Train(Common),
    /// Report evaluation KPIs of completed runs as JSON.
    Evaluate(Common),
    /// Run all methods and write the comparison table.
    Compare(Common),
    /// Write reward curves and CDFs of completed runs as CSV.
    Export(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    training_days: Option<u32>,
    #[arg(long)]
    evaluation_days: Option<u32>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        if let Some(d) = self.training_days {
            c.training_days = d;
        }
        if let Some(d) = self.evaluation_days {
            c.evaluation_days = d;
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = a.resolve()?;
            cfg.method = Method::Dflt;
            print_json(&harness::run(&cfg)?)
        }
        Command::Train(a) => print_json(&harness::run(&a.resolve()?)?),
        Command::Evaluate(a) => {
            let cfg = a.resolve()?;
            print_json(&harness::evaluate(&cfg, cfg.method)?)
        }
        Command::Compare(a) => {
            let report = harness::compare(&a.resolve()?)?;
            println!("{:<8} {:>10} {:>10} {:>7} {:>7} {:>7} {:>7} {:>8} {:>8} {:>9} {:>9}", "method", "tput", "latency", "HOLR", "HOER", "HOWR", "HOPPR", "tputAn", "rlfAn", "failRed", "reward");
            let na = |x: Option<f64>| x.map_or("N/A".into(), |v| format!("{v:.2}"));
            for r in &report.rows {
                println!(
                    "{:<8} {:>10.3} {:>10.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>8} {:>8} {:>9} {:>9.4}",
                    r.method.label(),
                    r.dl_throughput_mbps,
                    r.dl_latency_ms,
                    r.holr_pct,
                    r.hoer_pct,
                    r.howr_pct,
                    r.hoppr_pct,
                    na(r.tput_anomaly_pct),
                    na(r.rlf_anomaly_pct),
                    na(r.failure_reduction_pct),
                    r.final_training_reward
                );
            }
            print_json(&report.checks)
        }
        Command::Export(a) => {
            let cfg = a.resolve()?;
            let methods = if a.method.is_some() { vec![cfg.method] } else { Method::ALL.to_vec() };
            let files = harness::export_curves(&cfg, &methods, &cfg.output_dir.join("curves"))?;
            print_json(&files)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<HarnessError>().map_or("error", HarnessError::kind);
            let msg = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
