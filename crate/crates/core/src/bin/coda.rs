use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coda::bundle::{load_bundle, BundlePaths, LoadError, RunReport};
use coda::runtime::{parse_scenario, render_trace, TraceFormat, TraceLevel};

#[derive(Parser)]
#[command(
    name = "coda",
    version,
    about = "Run context-oriented programs against a Datalog context"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundle: a directory, or .cml/.ctx/.hdl/.scn files.
    Run {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Scenario file to use instead of the bundle's, or `none` for no events.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write the trace here (`-` for standard output).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

fn main() -> ExitCode {
    let Cli { command } = Cli::parse();
    let Command::Run {
        paths,
        scenario,
        max_steps,
        trace,
        format,
    } = command;
    match run(paths, scenario, max_steps, trace, format) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(
    paths: Vec<PathBuf>,
    scenario: Option<String>,
    max_steps: usize,
    trace: Option<PathBuf>,
    format: Format,
) -> Result<u8, String> {
    let level = match std::env::var("CODA_TRACE_LEVEL") {
        Ok(s) => s.parse::<TraceLevel>()?,
        Err(_) => TraceLevel::default(),
    };
    let err = |e: LoadError| e.to_string();
    let mut bundle = load_bundle(&BundlePaths::resolve(&paths).map_err(err)?).map_err(err)?;
    match scenario.as_deref() {
        None => {}
        Some("none") => bundle.scenario = bundle.scenario.without_injections(),
        Some(file) => {
            let src = fs::read_to_string(file).map_err(|e| format!("{file}: {e}"))?;
            bundle.scenario = parse_scenario(&src).map_err(|e| format!("{file}:{e}"))?;
            if let Some(i) = bundle
                .scenario
                .injections
                .iter()
                .find(|i| !bundle.scenario.events.contains_key(&i.event))
            {
                return Err(format!("scenario injects undefined event `{}`", i.event));
            }
        }
    }

    let result = bundle.run(max_steps);
    let format = match format {
        Format::Text => TraceFormat::Text,
        Format::Structured => TraceFormat::Structured,
    };
    let rendered = render_trace(&result.trace, format, level);
    let mut stdout = io::stdout().lock();
    match &trace {
        Some(p) if p.as_os_str() == "-" => stdout
            .write_all(rendered.as_bytes())
            .map_err(|e| e.to_string())?,
        Some(p) => fs::write(p, rendered).map_err(|e| format!("{}: {e}", p.display()))?,
        None => {}
    }
    let report = RunReport::new(&result, trace.filter(|p| p.as_os_str() != "-"));
    write!(stdout, "{report}").map_err(|e| e.to_string())?;
    Ok(report.exit_code() as u8)
}
