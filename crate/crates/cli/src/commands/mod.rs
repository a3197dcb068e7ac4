pub mod bath;
pub mod fit;
pub mod linewidth;
pub mod pulse;
pub mod spectrum;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{config_hash, merge, FileConfig, DEFAULT_SEED, OUT_DIR_ENV};
use crate::error::{CliError, CliResult};
use crate::output::Context;

#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

/// Merges flags over the config file section `name`, sets up the thread
/// pool and output directory, and hashes the effective settings.
pub fn prepare<T: Serialize + DeserializeOwned>(name: &str, flags: &T, g: &Globals) -> CliResult<(T, Context)> {
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = g.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    if let Some(n) = g.threads.or(file.threads) {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out_dir = g
        .out_dir
        .clone()
        .or(file.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let (args, table) = merge(flags, file.section(name)?)?;
    let hash = config_hash(name, seed, &table);
    Ok((args, Context::new(name, seed, hash, out_dir)?))
}

pub fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Prefixes parse errors with the file they came from.
pub fn in_file(path: &Path) -> impl Fn(spinbath_core::Error) -> CliError + '_ {
    move |e| match e {
        spinbath_core::Error::Parse { .. } => CliError::Input(format!("{}: {e}", path.display())),
        e => CliError::Core(e),
    }
}

/// Comma-separated floats.
pub fn parse_list(what: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("{what}: bad number {t:?}"))))
        .collect()
}

/// `count` evenly spaced points on [0, t_max].
pub fn linear_grid(t_max: f64, count: usize) -> CliResult<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || count < 2 {
        return Err(CliError::Config("time grid needs t_max > 0 and at least 2 points".into()));
    }
    Ok((0..count).map(|k| t_max * k as f64 / (count - 1) as f64).collect())
}
