//! Optional TOML config file, merged under command-line flags.
//!
//! ```toml
//! seed = 7
//! out_dir = "results"
//!
//! [spectrum]
//! nuclei = "fs0,fs1"
//! fwhm_mhz = 2.0
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
pub const OUT_DIR_ENV: &str = "SPINBATH_OUT_DIR";

#[derive(Debug, Default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub table: toml::Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let seed = match table.get("seed") {
            None => None,
            Some(toml::Value::Integer(v)) if *v >= 0 => Some(*v as u64),
            Some(v) => return Err(CliError::Config(format!("seed must be a non-negative integer, got {v}"))),
        };
        let threads = match table.get("threads") {
            None => None,
            Some(toml::Value::Integer(v)) if *v > 0 => Some(*v as usize),
            Some(v) => return Err(CliError::Config(format!("threads must be a positive integer, got {v}"))),
        };
        let out_dir = match table.get("out_dir") {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(v) => return Err(CliError::Config(format!("out_dir must be a string, got {v}"))),
        };
        Ok(Self { seed, threads, out_dir, table })
    }

    pub fn section(&self, name: &str) -> CliResult<toml::Table> {
        match self.table.get(name) {
            None => Ok(toml::Table::new()),
            Some(toml::Value::Table(t)) => Ok(t.clone()),
            Some(_) => Err(CliError::Config(format!("[{name}] must be a table"))),
        }
    }
}

/// Overlays the flags that were given onto the file section; returns the
/// merged arguments and the merged table.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, mut section: toml::Table) -> CliResult<(T, toml::Table)> {
    let given = toml::Table::try_from(flags).map_err(|e| CliError::Config(e.to_string()))?;
    for (k, v) in given {
        section.insert(k, v);
    }
    let merged: T = section.clone().try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    Ok((merged, section))
}

/// sha256 over the command, seed and merged settings.
pub fn config_hash(command: &str, seed: u64, table: &toml::Table) -> String {
    let canonical = format!("command={command}\nseed={seed}\n{}", toml::to_string(table).unwrap_or_default());
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
