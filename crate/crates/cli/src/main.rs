//! `passage`: batch runner for the first-passage experiments.
//!
//! Exit status is 0 on success, 2 when the input fails validation and 3 when
//! a numerical diagnostic (grid loss, degenerate conditioning) stops a run.

mod commands;
mod settings;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use settings::{resolve, Cli, Settings, SettingsError};
use table::{Format, Table};

fn emit(s: &Settings, table: &Table) -> io::Result<()> {
    let mut w: Box<dyn Write> = match &s.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match s.format {
        Format::Csv => table.write_csv(&mut w, &s.metadata())?,
        Format::Json => table.write_json(&mut w)?,
    }
    w.flush()
}

fn execute(s: &Settings) -> Result<(), SettingsError> {
    let outcome = commands::run(s)?;
    emit(s, &outcome.table).map_err(|e| SettingsError::Invalid(format!("cannot write output: {e}")))?;
    outcome.failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = cli.command.split();
    let result = resolve(name, flags).and_then(|s| {
        if let Some(t) = s.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| SettingsError::Invalid(format!("cannot size the thread pool: {e}")))?;
        }
        execute(&s)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("passage {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
