use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "shaprank";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-invocation settings shared by every command.
pub struct Context {
    pub timing: bool,
    pub started: Instant,
    pub workers: Option<usize>,
}

impl Context {
    /// Seconds since start, only when `--timing` was given.
    pub fn wall_time(&self) -> Option<f64> {
        self.timing.then(|| self.started.elapsed().as_secs_f64())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub command: &'static str,
}

impl ToolInfo {
    pub fn new(command: &'static str) -> Self {
        Self {
            name: TOOL,
            version: VERSION,
            command,
        }
    }
}

/// Pretty JSON with a trailing newline, to `out` or stdout.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
