//! `limcom`: solve, check and canonicalize limited-commitment mechanisms.
//!
//! Every command prints one JSON document. Exit status is 0 on success, 2
//! when the input is invalid and 3 when a solver finds no feasible point.

mod commands;
mod error;
mod output;
mod plot;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Example, Mode};
use error::CliError;

#[derive(Parser)]
#[command(name = "limcom", version, about = "Mechanism design with limited commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-type durable-good monopoly in closed form.
    SolveDurable { file: PathBuf },
    /// Screening problem as a program over posteriors.
    SolveScreening {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "relaxed")]
        mode: Mode,
    },
    /// Menu implementability, menu transfers and DIC audits.
    CheckContracts { file: PathBuf },
    /// Fold, merge and canonicalize a finite mechanism.
    Canonicalize { file: PathBuf },
    /// Run one of the bundled worked examples.
    Replicate {
        #[arg(long, value_enum)]
        example: Example,
    },
    /// Write CSV plot data for a durable-good or screening problem.
    PlotData {
        file: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Re-check the margins reported in a result file.
    Verify { file: PathBuf, result: PathBuf },
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::SolveDurable { .. } => "solve-durable",
        Command::SolveScreening { .. } => "solve-screening",
        Command::CheckContracts { .. } => "check-contracts",
        Command::Canonicalize { .. } => "canonicalize",
        Command::Replicate { .. } => "replicate",
        Command::PlotData { .. } => "plot-data",
        Command::Verify { .. } => "verify",
    }
}

fn run(cmd: &Command) -> Result<Value, CliError> {
    match cmd {
        Command::SolveDurable { file } => commands::solve_durable(&problem::load(file)?),
        Command::SolveScreening { file, mode } => commands::solve_screening(&problem::load(file)?, *mode),
        Command::CheckContracts { file } => commands::check_contracts(&problem::load(file)?),
        Command::Canonicalize { file } => commands::canonicalize(&problem::load(file)?),
        Command::Replicate { example } => commands::replicate(*example),
        Command::PlotData { file, out } => {
            let files = plot::plot_data(&problem::load(file)?, out)?;
            Ok(json!({ "columns": plot::HEADER, "files": files }))
        }
        Command::Verify { file, result } => {
            let pf = problem::load(file)?;
            let text = std::fs::read_to_string(result)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", result.display()), None))?;
            commands::verify(&pf, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(result) => {
            output::emit(&json!({ "command": name(&cli.command), "status": "ok", "result": result }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut v = e.to_json();
            v["command"] = json!(name(&cli.command));
            output::emit(&v);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
