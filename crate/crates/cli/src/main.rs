//! `laxform`: construct Lagrangian 2-form multiforms for Lax systems and
//! mechanically verify their identities.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use laxform_cli::report::Report;
use laxform_cli::runner::{self, RunConfig};
use laxform_cli::spec::parse_spec;

#[derive(Parser)]
#[command(name = "laxform", version, about = "Lagrangian multiform verification for Lax systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Parser)]
struct CommonOpts {
    /// Root seed for randomized checks (default: LAXFORM_SEED or 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per numeric backstop
    #[arg(long)]
    trials: Option<u32>,
    /// Numeric matrix dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Output format
    #[arg(long, default_value = "text", value_parser = ["text", "jsonl"])]
    format: String,
    /// Write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the checks requested by a spec file
    Run {
        /// Path to the spec file
        spec: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the bundled verification suite
    PaperSuite {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var("LAXFORM_SEED").ok().and_then(|s| s.parse().ok())
}

fn emit(report: &Report, opts: &CommonOpts) -> std::io::Result<()> {
    let body = if opts.format == "jsonl" { report.to_jsonl() } else { report.to_text() };
    match &opts.out {
        Some(path) => std::fs::write(path, body),
        None => {
            print!("{}", body);
            Ok(())
        }
    }
}

fn run_one(path: &PathBuf, opts: &CommonOpts) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {}", path.display(), e);
            return ExitCode::from(2);
        }
    };
    let doc = match parse_spec(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {}: {}", path.display(), e);
            return ExitCode::from(2);
        }
    };
    let cfg = runner::resolve_config(&doc, opts.seed, opts.trials, opts.dim, env_seed());
    match runner::execute(&doc, &cfg, &text) {
        Ok(report) => {
            if emit(&report, opts).is_err() {
                eprintln!("error: cannot write report");
                return ExitCode::from(2);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}

fn run_paper_suite(opts: &CommonOpts) -> ExitCode {
    let root = opts.seed.or(env_seed()).unwrap_or(runner::DEFAULT_SEED);
    let mut records = Vec::new();
    let mut combined_input = String::new();
    for (name, text) in laxform_cli::PAPER_SUITE {
        combined_input.push_str(text);
        let doc = match parse_spec(text) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: bundled fixture {}: {}", name, e);
                return ExitCode::from(2);
            }
        };
        let cfg = RunConfig {
            seed: laxform_core::derive_seed(root, name),
            trials: opts.trials.or(doc.options.trials).unwrap_or(runner::DEFAULT_TRIALS),
            dim: opts.dim.or(doc.options.dim.map(|d| d as usize)).unwrap_or(runner::DEFAULT_DIM),
        };
        match runner::execute(&doc, &cfg, text) {
            Ok(report) => {
                // fixture-qualified names keep repeated checks distinct
                records.extend(report.records.into_iter().map(|mut r| {
                    r.name = format!("{}/{}", name, r.name);
                    r
                }));
            }
            Err(e) => {
                eprintln!("error: bundled fixture {}: {}", name, e);
                return ExitCode::from(2);
            }
        }
    }
    let report = Report::new(records, &combined_input, root);
    if emit(&report, opts).is_err() {
        eprintln!("error: cannot write report");
        return ExitCode::from(2);
    }
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Run { spec, opts } => run_one(spec, opts),
        Cmd::PaperSuite { opts } => run_paper_suite(opts),
    }
}
