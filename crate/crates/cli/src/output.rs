//! Report files: every CSV, text report and SVG starts with the same
//! comment header (tool version, command, config hash, seed).

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Context {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub written: std::cell::RefCell<Vec<PathBuf>>,
}

impl Context {
    pub fn new(command: &str, seed: u64, config_hash: String, out_dir: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
        if !out_dir.is_dir() {
            return Err(CliError::Config(format!("output path {} is not a directory", out_dir.display())));
        }
        Ok(Self { command: command.to_string(), seed, config_hash, out_dir, written: Default::default() })
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("tool: spinbath {TOOL_VERSION}"),
            format!("command: {}", self.command),
            format!("config_hash: sha256:{}", self.config_hash),
            format!("seed: {}", self.seed),
        ]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn finish(&self, path: &Path, bytes: &[u8]) -> CliResult<PathBuf> {
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.written.borrow_mut().push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    /// CSV with `#` header lines (the standard ones plus `notes`) followed by
    /// whatever `body` writes.
    pub fn write_csv(
        &self,
        name: &str,
        notes: &[String],
        body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut buf = Vec::new();
        for line in self.header_lines().iter().chain(notes) {
            writeln!(buf, "# {line}").map_err(|e| CliError::io(&path, e))?;
        }
        body(&mut buf).map_err(|e| CliError::io(&path, e))?;
        self.finish(&path, &buf)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let mut out = String::new();
        for line in self.header_lines() {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str(text);
        self.finish(&self.path(name), out.as_bytes())
    }

    pub fn write_svg(&self, name: &str, svg: &str) -> CliResult<PathBuf> {
        let comment = self.header_lines().join("; ").replace("--", "- -");
        let body = match svg.find('\n') {
            Some(k) => format!("{}\n<!-- {comment} -->{}", &svg[..k], &svg[k..]),
            None => svg.to_string(),
        };
        self.finish(&self.path(name), body.as_bytes())
    }

    pub fn print_written(&self) {
        for p in self.written.borrow().iter() {
            println!("wrote {}", p.display());
        }
    }
}
