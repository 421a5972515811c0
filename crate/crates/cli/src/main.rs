use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use tsqc::counterfactual::{evaluate, CounterfactualStatement, Flavor, Verdict};
use tsqc::ensemble::DEFAULT_TRIALS;
use tsqc::scenarios::{catalogue, run_scenario, ScenarioInfo};
use tsqc::verify::run_verification;

/// Pre- and post-selected ensembles, the ABL rule and time-symmetric counterfactuals.
#[derive(Parser)]
#[command(name = "tsqc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Monte Carlo trials per run
    #[arg(long, global = true, default_value_t = DEFAULT_TRIALS, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a catalogue scenario
    Scenario {
        name: String,
        /// Scenario parameters as a JSON object
        params: Option<String>,
        /// Read the parameters from a JSON file instead
        #[arg(long, conflicts_with = "params")]
        config: Option<PathBuf>,
    },
    /// Evaluate a counterfactual statement read from JSON
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the identity suites and every scenario's gates
    Verify,
    /// Print the scenario catalogue
    List,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

/// Failure modes mapped to exit statuses.
enum Failure {
    Usage(String),
    Gate(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Gate(report)) => {
            if let Err(e) = emit(&cli, &report) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            eprintln!("error: statistical or identity gate failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let (body, pass) = match &cli.command {
        Command::Scenario { name, params, config } => {
            let params = match (params, config) {
                (Some(text), _) => serde_json::from_str(text).map_err(|e| Failure::Usage(format!("parameters: {e}")))?,
                (None, Some(path)) => read_json(path)?,
                (None, None) => Value::Null,
            };
            let report = run_scenario(name, &params, cli.trials, cli.seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let body = match cli.format {
                Format::Json => json(&report),
                Format::Csv => report.to_csv(),
                Format::Text => report.to_text(),
            };
            (body, report.pass)
        }
        Command::Evaluate { config } => {
            let stmt: CounterfactualStatement =
                serde_json::from_value(read_json(config)?).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            let verdict = evaluate(&stmt).map_err(|e| Failure::Usage(e.to_string()))?;
            let body = match cli.format {
                Format::Json => json(&verdict),
                Format::Csv => verdict_csv(&verdict),
                Format::Text => verdict_text(&verdict),
            };
            (body, true)
        }
        Command::Verify => {
            let report = run_verification(cli.trials, cli.seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let body = match cli.format {
                Format::Json => json(&report),
                Format::Csv => report.to_csv(),
                Format::Text => report.to_text(),
            };
            (body, report.pass())
        }
        Command::List => {
            let cat = catalogue();
            let body = match cli.format {
                Format::Json => json(&cat),
                Format::Csv => list_csv(&cat),
                Format::Text => list_text(&cat),
            };
            (body, true)
        }
    };
    if !pass {
        return Err(Failure::Gate(body));
    }
    emit(cli, &body).map_err(|e| Failure::Usage(e.to_string()))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(cli: &Cli, body: &str) -> io::Result<()> {
    match &cli.output {
        Some(path) => fs::write(path, body),
        None => io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn flavor_name(f: Flavor) -> &'static str {
    match f {
        Flavor::SingleAntecedent => "single",
        Flavor::CompoundAntecedent => "compound",
    }
}

fn verdict_text(v: &Verdict) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "flavor          {}", flavor_name(v.flavor));
    let _ = writeln!(out, "classification  {}", v.classification.as_str());
    let _ = writeln!(out, "max deviation   {:.6}", v.max_deviation);
    let _ = writeln!(out, "cotenable       {}", v.cotenable);
    let _ = writeln!(out, "tvd at t_b      {:.6}", v.cotenability.tvd);
    if let Some(d) = v.cotenability.delta_selected {
        let _ = writeln!(out, "delta selected  {d:+.6}");
    }
    let _ = writeln!(out, "\n{:<12} {:>10} {:>16}", "outcome", "ABL", "counterfactual");
    for (c, w) in v.claimed.entries().iter().zip(v.counterfactual_world.entries()) {
        let _ = writeln!(out, "{:<12} {:>10.6} {:>16.6}", c.label, c.probability, w.probability);
    }
    out
}

fn verdict_csv(v: &Verdict) -> String {
    let mut out = String::from("outcome,abl,counterfactual,flavor,classification\n");
    for (c, w) in v.claimed.entries().iter().zip(v.counterfactual_world.entries()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.label,
            c.probability,
            w.probability,
            flavor_name(v.flavor),
            v.classification.as_str()
        );
    }
    out
}

fn list_text(cat: &[ScenarioInfo]) -> String {
    let mut out = String::new();
    for info in cat {
        let _ = writeln!(out, "{}\n    {}", info.name, info.summary);
        for p in &info.params {
            let _ = writeln!(out, "    {:<12} {} (default {}): {}", p.name, p.kind, p.default, p.doc);
        }
    }
    out
}

fn list_csv(cat: &[ScenarioInfo]) -> String {
    let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
    let mut out = String::from("scenario,param,kind,default,doc\n");
    for info in cat {
        if info.params.is_empty() {
            let _ = writeln!(out, "{},,,,", info.name);
        }
        for p in &info.params {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                info.name,
                p.name,
                quote(p.kind),
                quote(p.default),
                quote(p.doc)
            );
        }
    }
    out
}
