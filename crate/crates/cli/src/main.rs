//! `chronoscale`: command-line front end for the time-scale solvers.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver refusal, 4 numerical
//! failure. Diagnostics for codes 2–4 are printed to stderr as JSON.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod catalog;
mod commands;
mod inputs;

use clap::{Parser, Subcommand};
use commands::{Artifacts, Failure};
use serde::Deserialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chronoscale", version, about = "Dynamic equations on time scales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Sample a time scale on a window.
    Scale(commands::ScaleArgs),
    /// Hilger exponential `e_p(to, from)` for constant `p`.
    Exp(commands::ExpArgs),
    /// Initial value problem `x^Δ = A(t)x + f(t)`.
    Solve(commands::SolveArgs),
    /// Green operator: norm estimate, bounded solution, residual check.
    Green(commands::GreenArgs),
    /// Bounded solution of an almost linear system by contraction.
    Bounded(commands::BoundedArgs),
    /// Exponentially decaying solution for a regular linear part.
    Decay(commands::DecayArgs),
    /// Lyapunov exponents and the trace-inequality defect.
    Lyap(commands::LyapArgs),
    /// Print the builtin catalog.
    List,
    /// Run a scenario file: a JSON object with `"command"` and the arguments
    /// of that command.
    #[serde(skip)]
    Run {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn dispatch(command: &Command) -> Result<(Artifacts, Option<PathBuf>), Failure> {
    Ok(match command {
        Command::Scale(a) => (commands::scale(a)?, a.common.out.clone()),
        Command::Exp(a) => (commands::exp(a)?, a.out.clone()),
        Command::Solve(a) => (commands::solve(a)?, a.common.out.clone()),
        Command::Green(a) => (commands::green(a)?, a.common.out.clone()),
        Command::Bounded(a) => (commands::bounded(a)?, a.common.out.clone()),
        Command::Decay(a) => (commands::decay(a)?, a.common.out.clone()),
        Command::Lyap(a) => (commands::lyap(a)?, a.common.out.clone()),
        Command::List => (commands::list()?, None),
        Command::Run { scenario } => {
            let text = std::fs::read_to_string(scenario)?;
            let inner: Command =
                serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", scenario.display())))?;
            if matches!(inner, Command::Run { .. }) {
                return Err(Failure::Schema("scenarios cannot nest".into()));
            }
            dispatch(&inner)?
        }
    })
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn emit(art: &Artifacts, out: Option<&PathBuf>) -> std::io::Result<()> {
    let json = pretty(&art.report);
    let mut stdout = std::io::stdout().lock();
    let printed = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if let Some(csv) = &art.csv {
                std::fs::write(dir.join(format!("{}.csv", art.name)), csv)?;
            }
            std::fs::write(dir.join(format!("{}.json", art.name)), format!("{json}\n"))?;
            writeln!(stdout, "{json}")
        }
        None => match (&art.csv, art.csv_primary) {
            (Some(csv), true) => write!(stdout, "{csv}"),
            _ => writeln!(stdout, "{json}"),
        },
    };
    match printed.and_then(|()| stdout.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn exit_code(f: &Failure) -> (u8, &'static str, String) {
    match f {
        Failure::Schema(m) => (2, "schema", m.clone()),
        Failure::Solver(e) if e.is_input() => (2, "schema", e.to_string()),
        Failure::Solver(e) if e.is_refusal() => (3, "refusal", e.to_string()),
        Failure::Solver(e) => (4, "numerical", e.to_string()),
        Failure::Io(e) => (4, "io", e.to_string()),
        Failure::Gate(m) => (4, "numerical", m.clone()),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CHRONOSCALE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn diagnose(code: u8, kind: &str, message: &str) -> ExitCode {
    let diag = serde_json::json!({ "error": kind, "exit_code": code, "message": message });
    eprintln!("{}", pretty(&diag));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return diagnose(2, "schema", e.to_string().trim_end()),
    };
    let result = dispatch(&cli.command).and_then(|(art, out)| emit(&art, out.as_ref()).map_err(Failure::Io));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, message) = exit_code(&f);
            diagnose(code, kind, &message)
        }
    }
}
