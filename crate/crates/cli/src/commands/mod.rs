//! Subcommand implementations and shared I/O.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use dmpart_core::{SchedError, TaskSetDocument};
use serde::Serialize;

pub mod curves;
pub mod partition;
pub mod random;
pub mod tight;

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
}

#[derive(Debug)]
pub enum CliError {
    /// Flag combination the grammar cannot express.
    Usage(String),
    /// Unreadable or invalid input, or a failed analysis.
    Input(String),
}

impl From<SchedError> for CliError {
    fn from(e: SchedError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T = Status> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_document(path: &Path) -> CliResult<TaskSetDocument> {
    let text = read_text(path)?;
    TaskSetDocument::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Opens `path` for writing, or stdout when absent.
pub fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
