use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fraclab::config::{parse_config_with, Overrides};
use fraclab::run::{run, EXIT_ERROR};

/// Fractional seminorms, Riesz potentials and Lyapunov-type bounds on
/// homogeneous groups.
#[derive(Debug, Parser)]
#[command(name = "fraclab", version)]
struct Cli {
    /// One of riesz, verify, psublap, seminorm.
    task: String,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cells per axis of the base grid.
    #[arg(long)]
    resolution: Option<usize>,
    /// Inequality for the verify task: gn, ckn, ckn-critical, hardy, sobolev.
    #[arg(long)]
    inequality: Option<String>,
    /// Mode for the psublap task: apply, residual, lyapunov, bound.
    #[arg(long)]
    mode: Option<String>,
    /// Dump the main grid function of the run as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn execute(cli: Cli) -> fraclab::Result<i32> {
    let text = std::fs::read_to_string(&cli.config)?;
    let overrides = Overrides {
        task: Some(cli.task),
        resolution: cli.resolution,
        seed: cli.seed,
        output: cli.out,
        csv: cli.csv,
        inequality: cli.inequality,
        mode: cli.mode,
    };
    let cfg = parse_config_with(&text, &overrides)?;
    let report = run(&cfg)?;
    let json = report.to_json()?;
    match &cfg.output {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
