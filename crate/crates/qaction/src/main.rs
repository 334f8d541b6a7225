use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qaction::commands::{self, CommandError, RunOptions};
use qaction::io::{Format, TableStyle};

#[derive(Debug, Parser)]
#[command(
    name = "qaction",
    version,
    about = "Quantum-action fits, Euclidean propagators and Poincaré sections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Encoding of tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write tables as gnuplot whitespace tables (`.dat`) instead.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Euclidean propagator table and spectrum.
    Propagate(Common),
    /// Quantum-action fit at one time or over a time list.
    Fit(Common),
    /// Ground state, transformation law, WKB report and hydrogen table.
    Analytic(Common),
    /// Poincaré sections and the classical/quantum comparison.
    Poincare(Common),
}

type Runner = fn(&std::path::Path, &RunOptions) -> Result<commands::Report, CommandError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (run, common): (Runner, &Common) = match &cli.command {
        Command::Propagate(c) => (commands::propagate, c),
        Command::Fit(c) => (commands::fit, c),
        Command::Analytic(c) => (commands::analytic, c),
        Command::Poincare(c) => (commands::poincare, c),
    };
    if let Some(n) = common.workers {
        if n == 0 {
            eprintln!("config error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("could not start {n} workers: {e}");
            return ExitCode::from(3);
        }
    }
    let opts = RunOptions {
        out: common.out.clone(),
        style: TableStyle {
            format: common.format,
            gnuplot: common.gnuplot,
        },
    };
    match run(&common.config, &opts) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
