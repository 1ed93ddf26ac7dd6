use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use branchform_cli::scenario::load_scenario;
use branchform_cli::{exit_code, run, Command, Flags};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Integrate forms over branched submanifolds described by a scenario file.
///
/// Exit status: 0 when every check passes, 2 on a failed check, 1 on error.
#[derive(Parser, Debug)]
#[command(name = "branchform", version)]
struct Args {
    command: Command,
    scenario: PathBuf,
    /// Mesh-resolution multiplier.
    #[arg(long)]
    refine: Option<usize>,
    /// Gauss nodes per cell and axis.
    #[arg(long = "quad-order")]
    quad_order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(args: &Args) -> Result<i32> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    let seed = match std::env::var("BRANCHFORM_SEED") {
        Ok(s) => Some(s.trim().parse::<u64>().context("BRANCHFORM_SEED must be an unsigned integer")?),
        Err(_) => None,
    };
    let scenario = load_scenario(&args.scenario, seed)?;
    let flags = Flags { refine: args.refine, quad_order: args.quad_order, tolerance: args.tol };
    let out = run(args.command, &scenario, flags)?;
    let text = match args.format {
        Format::Json => out.to_json()?,
        Format::Csv => out.to_csv()?,
    };
    match &args.report {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            println!("{} {}: {}", out.command, out.scenario, if out.pass { "pass" } else { "FAIL" });
        }
        None => print!("{text}"),
    }
    Ok(exit_code(&out))
}
