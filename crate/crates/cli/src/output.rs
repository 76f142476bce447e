//! Report files. Every file starts with the provenance header: CSV files
//! with a `#` line, JSON files with a `header` object next to the resolved
//! config.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Context};

pub const ARTIFACT: &str = "phnlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub artifact: String,
    pub version: String,
    pub config_sha256: String,
    pub master_seed: u64,
}

impl Header {
    pub fn new(hashed: &ExperimentConfig, master_seed: u64) -> Self {
        let bytes = serde_json::to_vec(hashed).expect("config serializes");
        Self {
            artifact: ARTIFACT.into(),
            version: VERSION.into(),
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            master_seed,
        }
    }

    /// Body of the CSV comment line.
    pub fn line(&self) -> String {
        format!(
            "{} {} config_sha256={} master_seed={}",
            self.artifact, self.version, self.config_sha256, self.master_seed
        )
    }
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `{"header", "subcommand", "config", "report"}` as pretty JSON.
    pub fn write_json<T: Serialize>(&self, name: &str, report: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            header: &'a Header,
            subcommand: &'a str,
            config: &'a ExperimentConfig,
            report: &'a T,
        }
        let env = Envelope {
            header: &self.header,
            subcommand: self.subcommand,
            config: &self.config,
            report,
        };
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&env)
            .map_err(|e| CliError::Invalid(format!("cannot serialize report: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Opens `name` and writes the header line.
    pub fn csv(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# {}", self.header.line())?;
        Ok((path, w))
    }

    /// Writes a CSV with header line, column names and preformatted rows.
    pub fn write_table(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.csv(name)?;
        writeln!(w, "{}", columns.join(","))?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
