use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use portarb::explain::explain;
use portarb::simnet::{parse_trace, summarize, trace_to_jsonl, ScenarioError};
use portarb::{compile, emit_rules, load_scenario, parse_behavior_model, parse_network, run_until};
use portarb::{Diagnostic, PortName, RuleFormat};

const OK: u8 = 0;
const INVALID: u8 = 1;
const USAGE: u8 = 2;
const IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "portarb",
    version,
    about = "Compile behavior models into port arbitration rules and simulate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model against a network and print its selection rules.
    Compile {
        model: PathBuf,
        network: PathBuf,
        /// Add missing observer connections instead of failing.
        #[arg(long)]
        auto_observe: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the rules here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat warnings as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Check a model against a network, including rule conflicts.
    Validate {
        model: PathBuf,
        network: PathBuf,
        #[arg(long)]
        auto_observe: bool,
        #[arg(long)]
        strict: bool,
    },
    /// Compile a scenario's model and replay its scripted components.
    Simulate {
        scenario: PathBuf,
        /// Write the JSONL trace here; without it the trace goes to
        /// standard output and the summary to standard error.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Stop before this time (ms).
        #[arg(long)]
        until: Option<u64>,
    },
    /// Explain the decisions recorded in a trace.
    Explain {
        trace: PathBuf,
        /// Only records at exactly this time (ms).
        #[arg(long)]
        at: Option<u64>,
        /// Only records at this destination port.
        #[arg(long)]
        port: Option<String>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(IO, format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(IO, format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(IO, format!("stdout: {e}"))),
    }
}

fn report(diagnostics: &[Diagnostic], strict: bool) -> u8 {
    for d in diagnostics {
        eprintln!("{d}");
    }
    let failed = diagnostics.iter().any(|d| d.is_error() || strict);
    if failed {
        INVALID
    } else {
        OK
    }
}

fn load_pair(model: &Path, network: &Path) -> Result<(portarb::BehaviorModel, portarb::NetworkDescription), Failure> {
    let model_text = read(model)?;
    let network_text = read(network)?;
    let model =
        parse_behavior_model(&model_text).map_err(|e| Failure::new(USAGE, format!("{}: {e}", model.display())))?;
    let network =
        parse_network(&network_text).map_err(|e| Failure::new(USAGE, format!("{}: {e}", network.display())))?;
    Ok((model, network))
}

fn cmd_compile(
    model: &Path,
    network: &Path,
    auto_observe: bool,
    format: Format,
    out: Option<&Path>,
    strict: bool,
) -> CmdResult {
    let (model, network) = load_pair(model, network)?;
    let compilation = compile(&model, &network, auto_observe);
    let status = report(&compilation.diagnostics, strict);
    if let Some(rules) = compilation.rules.as_ref().filter(|_| status == OK) {
        let format = match format {
            Format::Text => RuleFormat::Text,
            Format::Json => RuleFormat::Json,
        };
        write_out(out, &emit_rules(rules, format))?;
    }
    Ok(status)
}

fn cmd_validate(model: &Path, network: &Path, auto_observe: bool, strict: bool) -> CmdResult {
    let (model, network) = load_pair(model, network)?;
    let compilation = compile(&model, &network, auto_observe);
    Ok(report(&compilation.diagnostics, strict))
}

fn cmd_simulate(scenario: &Path, trace_path: Option<&Path>, until: Option<u64>) -> CmdResult {
    let mut scenario = load_scenario(scenario).map_err(|e| {
        let code = if matches!(e, ScenarioError::Io { .. }) {
            IO
        } else {
            USAGE
        };
        Failure::new(code, e.to_string())
    })?;
    let compilation = compile(&scenario.model, &scenario.network, true);
    if report(&compilation.diagnostics, false) != OK {
        return Ok(INVALID);
    }
    let rules = compilation.rules.expect("rules exist when validation passes");
    scenario.network = compilation.network;
    let trace = run_until(&scenario, &rules, until.unwrap_or(scenario.horizon_ms))
        .map_err(|e| Failure::new(INVALID, e.to_string()))?;
    let jsonl = trace_to_jsonl(&trace.records);
    let summary = summarize(&trace.records);
    match trace_path {
        Some(path) => {
            write_out(Some(path), &jsonl)?;
            write_out(None, &summary)?;
        }
        None => {
            write_out(None, &jsonl)?;
            eprint!("{summary}");
        }
    }
    Ok(OK)
}

fn cmd_explain(trace: &Path, at: Option<u64>, port: Option<&str>) -> CmdResult {
    let text = read(trace)?;
    let records = parse_trace(&text).map_err(|e| Failure::new(USAGE, format!("{}: {e}", trace.display())))?;
    let port = port
        .map(PortName::parse)
        .transpose()
        .map_err(|e| Failure::new(USAGE, format!("--port: {e}")))?;
    let lines = explain(&records, at, port.as_ref()).map_err(|e| Failure::new(USAGE, e.to_string()))?;
    if lines.is_empty() {
        write_out(None, "no records\n")?;
    } else {
        write_out(None, &lines.iter().map(|l| format!("{l}\n")).collect::<String>())?;
    }
    Ok(OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile {
            model,
            network,
            auto_observe,
            format,
            out,
            strict,
        } => cmd_compile(model, network, *auto_observe, *format, out.as_deref(), *strict),
        Command::Validate {
            model,
            network,
            auto_observe,
            strict,
        } => cmd_validate(model, network, *auto_observe, *strict),
        Command::Simulate { scenario, trace, until } => cmd_simulate(scenario, trace.as_deref(), *until),
        Command::Explain { trace, at, port } => cmd_explain(trace, *at, port.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
