//! `dirac-fdtd`: run scenario files or built-in presets.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical blow-up,
//! 4 I/O error. The worker thread count is taken from `DIRAC_FDTD_THREADS`
//! (default: all cores).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirac_core::scenario::{parse_with_overrides, preset_names, preset_summary, preset_text};
use dirac_core::{run_scenario, Error};

const THREADS_VAR: &str = "DIRAC_FDTD_THREADS";

#[derive(Parser)]
#[command(name = "dirac-fdtd", version, about = "Time-dependent Dirac equation solver")]
struct Cli {
    /// Print the built-in presets and exit.
    #[arg(long)]
    list_presets: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or preset.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    file: Option<PathBuf>,

    /// Built-in scenario instead of a file.
    #[arg(long)]
    preset: Option<String>,

    /// Override one key, e.g. `--set packet.spin=down`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (default: the scenario's `run.output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Parse and validate only.
    #[arg(long)]
    validate_only: bool,
}

enum Failure {
    Config(String),
    BlowUp(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Format { .. } => Failure::Io(e.to_string()),
            Error::BlowUp { .. } => Failure::BlowUp(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn list_presets() {
    for name in preset_names() {
        println!("{name:<28} {}", preset_summary(name).unwrap_or_default());
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let text = match (&args.file, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => preset_text(name)?.to_string(),
        (None, None) => return Err(Failure::Config("no scenario given".into())),
    };
    let scenario = parse_with_overrides(&text, &args.overrides)?;
    if args.validate_only {
        println!("{}: ok", scenario.name);
        return Ok(());
    }
    configure_threads()?;
    let report = run_scenario(&scenario, args.out.as_deref())?;
    let m = &report.manifest;
    println!(
        "{}: {} steps in {:.1} s, norm drift {:.3e}, energy drift {:.3e}, output in {}",
        scenario.name,
        m.steps_completed,
        m.wall_time_s,
        m.norm_drift,
        m.energy_drift,
        report.output_dir.display()
    );
    if let Some(f) = &m.failure {
        // partial outputs are kept; any early stop is a numerical failure
        return Err(Failure::BlowUp(format!(
            "run stopped at step {}: {}",
            f.step, f.message
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        _ if cli.list_presets => {
            list_presets();
            Ok(())
        }
        Some(Command::Run(args)) => run(args),
        None => Err(Failure::Config("nothing to do; see --help".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::BlowUp(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}
