//! Command-line front end: run the two gateway experiments (simulated or on
//! this machine), serve the remote execution protocol, or split a flow into
//! its local and offloadable halves.
//!
//! Exit codes: 0 success (and checks passed), 1 usage error, 2 runtime
//! error, 3 checks failed.

use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use edgeflow::bench::{
    all_passed, default_characterize_workload, default_compare_workload,
    default_offloadable_flow, render_characterize_summary, render_compare_report,
    run_characterize, run_compare, run_host, write_atomic, write_characterize_artifacts,
    write_compare_artifacts, BenchConfig, BenchError, CharacterizeReport, CheckOutcome,
    CompareReport, HostOptions, StrategyRow,
};
use edgeflow::engine::stats;
use edgeflow::flow::{extract_offloadable, parse_flow, serialize_flow, FlowGraph, ParseError};
use edgeflow::policy::{parse_policy, PolicyParseError, PolicySpec};
use edgeflow::remote::{RemoteExecutor, RemoteServer, ServeError};
use edgeflow::sim::WorkloadSpec;

const DEFAULT_REMOTE_URL: &str = "http://127.0.0.1:7070";

#[derive(Parser)]
#[command(
    name = "edgeflow",
    version,
    about = "Edge gateway offloading: characterize, compare strategies, serve, rewrite",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    globals: Globals,
}

#[derive(Args)]
struct Globals {
    /// Flow document (JSON); host runs and `rewrite` read it
    #[arg(long, global = true, value_name = "PATH")]
    flow: Option<PathBuf>,
    /// Policy spec, e.g. `jobs:4` or `any-of(cpu:0.9,temp:78)`
    #[arg(long, global = true, value_name = "SPEC")]
    policy: Option<String>,
    /// Where the experiment runs
    #[arg(long, global = true, value_enum, default_value = "sim")]
    mode: Mode,
    /// Workload seed override
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Directory artifacts are written to
    #[arg(long, global = true, value_name = "DIR", default_value = "bench-out")]
    out: PathBuf,
    /// Remote executor base URL (host mode offloads over HTTP)
    #[arg(long, global = true, value_name = "URL")]
    remote_url: Option<String>,
    /// Evaluate tolerance checks; failing them exits 3
    #[arg(long, global = true)]
    check: bool,
    /// Experiment config file (JSON, same interchange format as flows)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Virtual time on the calibrated gateway model
    Sim,
    /// Wall-clock time on this machine's engine and metrics
    Host,
}

#[derive(Subcommand)]
enum Command {
    /// Run the no-offload characterization and write jobs.csv,
    /// timeseries.csv, summary.txt
    Characterize,
    /// Run every strategy against the identical workload and write the
    /// comparison table
    Compare,
    /// Serve the remote execution protocol until killed
    Serve {
        /// Address to bind
        #[arg(long, default_value = "127.0.0.1:7070")]
        addr: String,
    },
    /// Split a flow with an offloadable tab into local and remote halves
    Rewrite,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Policy(#[from] PolicyParseError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Rewrite(#[from] edgeflow::flow::RewriteError),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Config(String),
}

enum Outcome {
    Success,
    ChecksFailed,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let config = match load_config(&cli.globals) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Characterize => cmd_characterize(&cli.globals, &config),
        Command::Compare => cmd_compare(&cli.globals, &config),
        Command::Serve { addr } => cmd_serve(addr, &config),
        Command::Rewrite => cmd_rewrite(&cli.globals),
    };
    match result {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("checks failed");
            3
        }
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn load_config(globals: &Globals) -> Result<BenchConfig, CliError> {
    match &globals.config {
        None => Ok(BenchConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
        }
    }
}

/// The workload an experiment will run: config override, or the command's
/// default shape, with `--seed` applied on top of either.
fn resolve_workload(
    config: &BenchConfig,
    seed: Option<u64>,
    default: WorkloadSpec,
) -> WorkloadSpec {
    let mut workload = config.workload.clone().unwrap_or(default);
    if let Some(seed) = seed {
        match &mut workload {
            WorkloadSpec::ClosedLoop { seed: s, .. } => *s = seed,
            WorkloadSpec::OpenLoop { seed: s, .. } => *s = seed,
        }
    }
    workload
}

fn load_flow(globals: &Globals) -> Result<FlowGraph, CliError> {
    match &globals.flow {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            Ok(parse_flow(&text)?)
        }
        None => Ok(default_offloadable_flow(25)),
    }
}

fn host_options(globals: &Globals, config: &BenchConfig) -> HostOptions {
    HostOptions {
        seconds_per_unit: config.seconds_per_unit,
        sample_period_ms: config.sample_period_ms,
        remote_url: globals.remote_url.clone(),
        ..HostOptions::default()
    }
}

fn finish(check_requested: bool, checks: &[CheckOutcome]) -> Result<Outcome, CliError> {
    if check_requested && !all_passed(checks) {
        Ok(Outcome::ChecksFailed)
    } else {
        Ok(Outcome::Success)
    }
}

fn cmd_characterize(globals: &Globals, config: &BenchConfig) -> Result<Outcome, CliError> {
    if let Some(policy_text) = &globals.policy {
        if parse_policy(policy_text)? != PolicySpec::AlwaysLocal {
            return Err(CliError::Config(
                "characterization measures the gateway without offloading; \
                 only --policy always-local applies"
                    .to_string(),
            ));
        }
    }
    let workload = resolve_workload(config, globals.seed, default_characterize_workload());
    let report = match globals.mode {
        Mode::Sim => {
            let mut config = config.clone();
            config.workload = Some(workload);
            run_characterize(&config)?
        }
        Mode::Host => {
            let flow = load_flow(globals)?;
            let run = run_host(&flow, "always-local", &workload, &host_options(globals, config))?;
            CharacterizeReport::from_run(
                workload,
                run.records,
                run.series,
                config.model.t_limit_c,
                &config.check,
            )
        }
    };
    let paths = write_characterize_artifacts(&report, &globals.out)?;
    print!("{}", render_characterize_summary(&report));
    println!();
    println!("wrote {}", paths.jobs_csv.display());
    println!("wrote {}", paths.timeseries_csv.display());
    println!("wrote {}", paths.summary_txt.display());
    finish(globals.check, &report.checks)
}

fn cmd_compare(globals: &Globals, config: &BenchConfig) -> Result<Outcome, CliError> {
    let mut config = config.clone();
    if let Some(policy) = &globals.policy {
        config.strategies = vec![policy.clone()];
    }
    let workload = resolve_workload(&config, globals.seed, default_compare_workload());
    config.workload = Some(workload.clone());
    let report = match globals.mode {
        Mode::Sim => run_compare(&config)?,
        Mode::Host => {
            if config.strategies.is_empty() {
                return Err(CliError::Config("no strategies to compare".to_string()));
            }
            let flow = load_flow(globals)?;
            let options = host_options(globals, &config);
            let mut rows = Vec::new();
            for raw in &config.strategies {
                let canonical = parse_policy(raw)?.to_string();
                let run = run_host(&flow, raw, &workload, &options)?;
                rows.push(StrategyRow {
                    strategy: canonical,
                    stats: stats(&run.records),
                    records: run.records,
                    series: run.series,
                });
            }
            CompareReport::from_rows(workload, rows, &config.check)
        }
    };
    let paths = write_compare_artifacts(&report, &globals.out)?;
    print!("{}", render_compare_report(&report));
    println!();
    println!("wrote {}", paths.report_txt.display());
    println!("wrote {}", paths.comparison_csv.display());
    for (_, jobs, series) in &paths.strategies {
        println!("wrote {}", jobs.display());
        println!("wrote {}", series.display());
    }
    finish(globals.check, &report.checks)
}

fn cmd_serve(addr: &str, config: &BenchConfig) -> Result<Outcome, CliError> {
    let executor = Arc::new(RemoteExecutor::new(config.seconds_per_unit));
    let server = RemoteServer::serve(executor, addr)?;
    println!("serving remote executor at {}", server.base_url());
    loop {
        std::thread::park();
    }
}

fn cmd_rewrite(globals: &Globals) -> Result<Outcome, CliError> {
    let path = globals
        .flow
        .as_ref()
        .ok_or_else(|| CliError::Config("rewrite needs --flow <path>".to_string()))?;
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.clone(),
        source,
    })?;
    let flow = parse_flow(&text)?;
    let remote_url = globals
        .remote_url
        .clone()
        .unwrap_or_else(|| DEFAULT_REMOTE_URL.to_string());
    let policy = globals
        .policy
        .clone()
        .unwrap_or_else(|| "jobs:4".to_string());
    parse_policy(&policy)?;
    let rewrite = extract_offloadable(&flow, &remote_url, &policy)?;
    let local = globals.out.join("local.json");
    let remote = globals.out.join("remote.json");
    write_atomic(&local, &serialize_flow(&rewrite.local_flow))?;
    write_atomic(&remote, &serialize_flow(&rewrite.remote_flow))?;
    println!("flow id:      {}", rewrite.flow_id);
    println!("offload link: {}", rewrite.offload_link_id);
    println!("wrote {}", local.display());
    println!("wrote {}", remote.display());
    Ok(Outcome::Success)
}
