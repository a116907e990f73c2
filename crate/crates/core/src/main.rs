use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bqm::pipeline::{emit, parse_config, run_pipeline, Command};

#[derive(Parser)]
#[command(name = "bqm", version, about = "Balanced quasi-monotone elliptic systems: checks, barriers, solves")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sampled structural checks.
    Check(Opts),
    /// Discretize and build the barriers.
    Barriers(Opts),
    /// Barriers plus primal, dual and oracle solves.
    Solve(Opts),
    /// Solves plus classification and agreement checks.
    Verify(Opts),
    /// Every stage.
    All(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampler seed, overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Reject unknown config keys.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Check(o) => (Command::Check, o),
        Cmd::Barriers(o) => (Command::Barriers, o),
        Cmd::Solve(o) => (Command::Solve, o),
        Cmd::Verify(o) => (Command::Verify, o),
        Cmd::All(o) => (Command::All, o),
    };

    let text = match &opts.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => "{}".to_string(),
    };
    let mut cfg = match parse_config(&text, opts.strict) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for key in &cfg.ignored_keys {
        eprintln!("warning: ignoring unknown key `{key}`");
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = opts.out {
        cfg.output.dir = out;
    }

    let outcome = run_pipeline(&cfg, command);
    let written = match emit(&outcome, &cfg.output.dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(3);
        }
    };
    for stage in &outcome.report.stages {
        let status = serde_json::to_value(stage.status).unwrap_or_default();
        let name = serde_json::to_value(stage.stage).unwrap_or_default();
        match &stage.reason {
            Some(r) => println!("{:<10} {:<8} {r}", name.as_str().unwrap_or(""), status.as_str().unwrap_or("")),
            None => println!("{:<10} {}", name.as_str().unwrap_or(""), status.as_str().unwrap_or("")),
        }
    }
    for a in &outcome.report.assertions {
        println!("assert {:<10} {} ({})", a.name, if a.passed { "pass" } else { "FAIL" }, a.detail);
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    ExitCode::from(outcome.exit_code() as u8)
}
