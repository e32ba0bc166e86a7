use std::fs;
use std::path::PathBuf;

use clap::Args;
use shaprank::make_figure2_game;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct MakeFig2Args {
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &MakeFig2Args) -> CliResult<()> {
    let mut text = make_figure2_game().to_json();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &args.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
