//! Run manifests: a complete, replayable record of one invocation.
//!
//! The manifest echoes every resolved configuration key (defaults included)
//! in config syntax, with run metadata as comments, so feeding the manifest
//! back as the configuration of the same subcommand reproduces the outputs
//! bit for bit on the same engine version.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Settings;
use crate::CliError;

pub struct Manifest<'a> {
    command: &'a str,
    out_dir: &'a Path,
    outputs: Vec<String>,
    notes: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, out_dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(CliError::Io)?;
        Ok(Self {
            command,
            out_dir,
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    /// Register an output file and return its full path.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn write(&self, settings: &Settings) -> Result<PathBuf, CliError> {
        let path = self
            .out_dir
            .join(format!("{}_manifest.txt", self.command.replace('-', "_")));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(CliError::Io)?);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "# pairsim run manifest")?;
            writeln!(w, "# engine_version = {}", pairsim_core::ENGINE_VERSION)?;
            writeln!(w, "# command = {}", self.command)?;
            for n in &self.notes {
                writeln!(w, "# {n}")?;
            }
            for o in &self.outputs {
                writeln!(w, "# output = {o}")?;
            }
            write!(w, "{}", settings.resolved_lines())?;
            Ok(())
        };
        emit().map_err(CliError::Io)?;
        Ok(path)
    }
}
