mod ops;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use ops::{Op, Options, Verdict};
use rmd_core::ic::IcMode;
use rmd_core::scalar;
use rmd_core::scenario::{self, Scenario};
use rmd_core::{Error, Rational};

const DEFAULT_SEED: u64 = 20240917;

#[derive(Parser)]
#[command(name = "rmd", version, about = "Exact checks for mechanisms with ambiguous beliefs")]
struct Cli {
    /// Print the report as JSON
    #[arg(long, global = true)]
    json: bool,

    /// Print every verdict's details
    #[arg(long, global = true)]
    verbose: bool,

    /// Cross-check LP results against brute-force oracles
    #[arg(long, global = true)]
    oracle: bool,

    /// Seed for randomized suites
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// IC notion: expost, interim or robust
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<IcMode>,

    /// Envelope tolerance (default: largest grid step)
    #[arg(long, global = true, value_parser = parse_rational)]
    tau: Option<Rational>,

    /// Virtual extraction bound
    #[arg(long, global = true, value_parser = parse_rational)]
    eps: Option<Rational>,

    /// Neighbourhood width in grid steps
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    window: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    /// Scenario JSON file
    scenario: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Belief-set checks: full dimension, overlap, nesting
    #[command(subcommand)]
    Beliefs(BeliefsCmd),
    /// Incentive compatibility
    #[command(subcommand)]
    Ic(IcCmd),
    /// Envelope condition and the envelope/monotonicity pipeline
    #[command(subcommand)]
    Envelope(EnvelopeCmd),
    /// Payment rules sharing one allocation
    #[command(subcommand)]
    Payments(PaymentsCmd),
    /// Surplus extraction
    #[command(subcommand)]
    Extract(ExtractCmd),
    /// Revelation principle
    #[command(subcommand)]
    Reveal(RevealCmd),
    /// Run every request listed in a scenario file
    Run(Target),
    /// Seeded random solver cross-checks
    Selftest {
        /// Number of random programs
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

#[derive(Subcommand)]
enum BeliefsCmd {
    Check(Target),
}

#[derive(Subcommand)]
enum IcCmd {
    Check(Target),
}

#[derive(Subcommand)]
enum EnvelopeCmd {
    Check(Target),
    Pipeline(Target),
}

#[derive(Subcommand)]
enum PaymentsCmd {
    Compare(Target),
}

#[derive(Subcommand)]
enum ExtractCmd {
    /// Probabilistic independence
    Pi(Target),
    /// Convex independence
    Ci(Target),
    /// Weak-full-extraction menu
    Menu(Target),
    /// Optimal value of the virtual extraction program
    Vse(Target),
    /// Menu within --eps of full extraction
    Virtual(Target),
    /// Contract classes forced by overlapping beliefs
    Collapse(Target),
    /// Best single contract
    Optimal(Target),
}

#[derive(Subcommand)]
enum RevealCmd {
    Transform(Target),
}

fn parse_mode(s: &str) -> Result<IcMode, String> {
    IcMode::parse(s).ok_or_else(|| format!("unknown mode \"{s}\" (expected expost, interim or robust)"))
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    scalar::parse(s).map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Validation { .. } => 2,
        Error::Capability(_) => 3,
    }
}

fn error_json(e: &Error) -> Value {
    match e {
        Error::Input(m) => json!({"kind": "input", "message": m}),
        Error::Validation { path, message } => json!({"kind": "validation", "path": path, "message": message}),
        Error::Capability(m) => json!({"kind": "capability", "message": m}),
    }
}

struct Outcome {
    op: &'static str,
    verdicts: Vec<Verdict>,
}

fn set_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("RMD_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::input(format!("RMD_THREADS must be a positive integer, got \"{v}\"")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::input(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn base_options(cli: &Cli) -> Options {
    Options {
        mode: cli.mode,
        tau: cli.tau.clone(),
        eps: cli.eps.clone(),
        window: cli.window.map(|w| w as usize),
        oracle: cli.oracle,
        params: Default::default(),
    }
}

fn single(cli: &Cli, s: &Scenario, op: Op) -> Result<Vec<Outcome>, Error> {
    let mut opts = base_options(cli);
    if let Some(i) = s.requests.iter().position(|r| r.op == op.name()) {
        opts.merge_params(&s.requests[i].params, &format!("requests[{i}]"))?;
    }
    Ok(vec![Outcome {
        op: op.name(),
        verdicts: ops::execute(s, op, &opts)?,
    }])
}

/// Requests run in parallel; results keep the file's order and the first
/// error in that order wins.
fn run_all(cli: &Cli, s: &Scenario) -> Result<Vec<Outcome>, Error> {
    if s.requests.is_empty() {
        return Err(Error::input("scenario has no requests to run"));
    }
    let planned = s
        .requests
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let path = format!("requests[{i}]");
            let op = Op::parse(&r.op)
                .ok_or_else(|| Error::validation(format!("{path}.op"), format!("unknown operation \"{}\"", r.op)))?;
            let mut opts = base_options(cli);
            opts.merge_params(&r.params, &path)?;
            Ok((op, opts))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    planned
        .par_iter()
        .map(|(op, opts)| {
            Ok(Outcome {
                op: op.name(),
                verdicts: ops::execute(s, *op, opts)?,
            })
        })
        .collect::<Vec<Result<Outcome, Error>>>()
        .into_iter()
        .collect()
}

fn command_name(c: &Command) -> (&'static str, Option<Op>, Option<&PathBuf>) {
    match c {
        Command::Beliefs(BeliefsCmd::Check(t)) => ("beliefs check", Some(Op::BeliefsCheck), Some(&t.scenario)),
        Command::Ic(IcCmd::Check(t)) => ("ic check", Some(Op::IcCheck), Some(&t.scenario)),
        Command::Envelope(EnvelopeCmd::Check(t)) => ("envelope check", Some(Op::EnvelopeCheck), Some(&t.scenario)),
        Command::Envelope(EnvelopeCmd::Pipeline(t)) => ("envelope pipeline", Some(Op::EnvelopePipeline), Some(&t.scenario)),
        Command::Payments(PaymentsCmd::Compare(t)) => ("payments compare", Some(Op::PaymentsCompare), Some(&t.scenario)),
        Command::Extract(e) => match e {
            ExtractCmd::Pi(t) => ("extract pi", Some(Op::ExtractPi), Some(&t.scenario)),
            ExtractCmd::Ci(t) => ("extract ci", Some(Op::ExtractCi), Some(&t.scenario)),
            ExtractCmd::Menu(t) => ("extract menu", Some(Op::ExtractMenu), Some(&t.scenario)),
            ExtractCmd::Vse(t) => ("extract vse", Some(Op::ExtractVse), Some(&t.scenario)),
            ExtractCmd::Virtual(t) => ("extract virtual", Some(Op::ExtractVirtual), Some(&t.scenario)),
            ExtractCmd::Collapse(t) => ("extract collapse", Some(Op::ExtractCollapse), Some(&t.scenario)),
            ExtractCmd::Optimal(t) => ("extract optimal", Some(Op::ExtractOptimal), Some(&t.scenario)),
        },
        Command::Reveal(RevealCmd::Transform(t)) => ("reveal transform", Some(Op::RevealTransform), Some(&t.scenario)),
        Command::Run(t) => ("run", None, Some(&t.scenario)),
        Command::Selftest { .. } => ("selftest", None, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let (name, op, path) = command_name(&cli.command);

    let mut report = json!({
        "tool": "rmd",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
    });
    if let Some(p) = path {
        report["scenario"] = json!(p.display().to_string());
    }

    let result = set_threads().and_then(|()| match path {
        None => {
            let Command::Selftest { cases } = &cli.command else {
                unreachable!("only selftest runs without a scenario")
            };
            report["seed"] = json!(cli.seed);
            Ok(vec![Outcome {
                op: "selftest",
                verdicts: selftest::run(cli.seed, *cases)?,
            }])
        }
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::input(format!("cannot read {}: {e}", p.display())))?;
            report["digest"] = json!(format!("sha256:{:x}", Sha256::digest(&bytes)));
            let text = String::from_utf8(bytes).map_err(|_| Error::input("scenario is not valid UTF-8"))?;
            let s = scenario::load_scenario(&text)?;
            match op {
                Some(op) => single(&cli, &s, op),
                None => run_all(&cli, &s),
            }
        }
    });

    let outcomes = match result {
        Ok(o) => o,
        Err(e) => {
            if cli.json {
                report["error"] = error_json(&e);
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            eprintln!("rmd: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };

    let pass = outcomes.iter().all(|o| o.verdicts.iter().all(|v| v.pass));
    if cli.json {
        let requests: Vec<Value> = outcomes
            .iter()
            .map(|o| {
                json!({"op": o.op, "verdicts": o.verdicts.iter().map(|v| v.detail.clone()).collect::<Vec<_>>()})
            })
            .collect();
        report["requests"] = Value::Array(requests);
        report["pass"] = json!(pass);
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        let mut header = format!("rmd {} {}", env!("CARGO_PKG_VERSION"), name);
        if let Some(p) = path {
            header.push_str(&format!(" {}", p.display()));
        }
        if let Some(d) = report.get("digest").and_then(Value::as_str) {
            header.push_str(&format!(" [{d}]"));
        }
        if name == "selftest" {
            header.push_str(&format!(" seed {}", cli.seed));
        }
        println!("{header}");
        for o in &outcomes {
            for v in &o.verdicts {
                println!("  {}", v.summary);
                if cli.verbose {
                    let pretty = serde_json::to_string_pretty(&v.detail).expect("verdict serializes");
                    for line in pretty.lines() {
                        println!("      {line}");
                    }
                }
            }
        }
        println!("result: {} ({} ms)", if pass { "PASS" } else { "FAIL" }, started.elapsed().as_millis());
    }
    ExitCode::from(if pass { 0 } else { 1 })
}
