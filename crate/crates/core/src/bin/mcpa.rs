use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mcpa::harness::{self, Backend, CampaignOptions, Config, GaeBackend, Method, RunOptions};
use mcpa::parallel::Execution;

#[derive(Debug, Parser)]
#[command(name = "mcpa", version, about = "Memory-centric power allocation experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of seeds (base_seed, base_seed + 1, ...).
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Comma-separated methods: mcpa, max_rate, max_cov, fairness, greedy, remember, uniform, custom.
    #[arg(long, global = true)]
    methods: Option<String>,
    /// Output CSV path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exam backend, overriding the config.
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Run seeds one after another instead of in parallel.
    #[arg(long, global = true)]
    sequential: bool,
    /// Fill the wall_ms column with measured times (output is then no longer reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allocate power once (seed = base_seed) and print the power vectors.
    Solve,
    /// Run a Monte-Carlo campaign and write one CSV row per (seed, method).
    Simulate,
    /// Run a campaign per power budget.
    Sweep {
        /// Comma-separated budgets in mW, overriding the config's sweep_mw.
        #[arg(long)]
        budgets: Option<String>,
    },
    /// Exam scores and memory accuracies per robot (staged five-robot layout by default).
    GaeTest,
}

fn load_config(common: &Common, fallback: fn() -> Config) -> Result<Config> {
    let mut config = match &common.config {
        Some(path) => Config::load(path)?,
        None => fallback(),
    };
    if let Some(b) = common.backend {
        config.backend = b;
    }
    Ok(config)
}

fn methods(common: &Common) -> Result<Vec<Method>> {
    Ok(match &common.methods {
        Some(list) => Method::parse_list(list)?,
        None => Method::DEFAULT.to_vec(),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execution(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Auto
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let exec = execution(common);
    let campaign_opts = CampaignOptions { execution: exec, run: RunOptions { timing: common.timing } };
    match cli.command {
        Command::Solve => {
            let scenario = harness::build_scenario(&load_config(common, Config::default)?)?;
            let backend = GaeBackend::for_scenario(&scenario)?;
            let seed = scenario.config.base_seed;
            let prepared = harness::prepare_run(&scenario, seed, &backend, exec)?;
            let runs = methods(common)?
                .into_iter()
                .map(|m| harness::run_prepared(&scenario, &prepared, m, campaign_opts.run))
                .collect::<mcpa::Result<Vec<_>>>()?;
            let mut stderr = io::stderr().lock();
            writeln!(stderr, "seed {seed}: gae = {:?}", prepared.gae.scores)?;
            for m in &runs {
                let mw: Vec<String> = m.powers_w.iter().map(|p| format!("{:.4}", p * 1e3)).collect();
                writeln!(stderr, "{:<10} p_mw = [{}]  accuracy = {:.4}  qom = {:.6}", m.method.name(), mw.join(", "), m.eqa_accuracy, m.qom)?;
            }
            harness::write_allocation_csv(output(common.out.as_deref())?, &prepared, &runs)?;
        }
        Command::Simulate => {
            let scenario = harness::build_scenario(&load_config(common, Config::default)?)?;
            let backend = GaeBackend::for_scenario(&scenario)?;
            let campaign = harness::run_campaign(&scenario, &methods(common)?, common.seeds.unwrap_or(50), &backend, campaign_opts)?;
            harness::write_runs_csv(output(common.out.as_deref())?, std::slice::from_ref(&campaign))?;
            harness::write_summary(io::stderr().lock(), std::slice::from_ref(&campaign))?;
        }
        Command::Sweep { budgets } => {
            let scenario = harness::build_scenario(&load_config(common, Config::default)?)?;
            let backend = GaeBackend::for_scenario(&scenario)?;
            let budgets: Vec<f64> = match budgets {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad budget '{s}'")))
                    .collect::<Result<_>>()?,
                None => scenario.config.sweep_mw.clone(),
            };
            let sweep = harness::run_sweep(&scenario, &methods(common)?, &budgets, common.seeds.unwrap_or(50), &backend, campaign_opts)?;
            harness::write_runs_csv(output(common.out.as_deref())?, &sweep)?;
            harness::write_summary(io::stderr().lock(), &sweep)?;
        }
        Command::GaeTest => {
            let scenario = harness::build_scenario(&load_config(common, Config::staged_five)?)?;
            let backend = GaeBackend::for_scenario(&scenario)?;
            let rows = harness::gae_table(&scenario, common.seeds.unwrap_or(50), &backend, exec)?;
            harness::write_gae_csv(output(common.out.as_deref())?, &rows)?;
        }
    }
    Ok(())
}

fn error_line(err: &anyhow::Error) -> String {
    let kind = err.downcast_ref::<mcpa::Error>().map_or("cli", mcpa::Error::kind);
    let message = format!("{err:#}");
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::from(2)
        }
    }
}
