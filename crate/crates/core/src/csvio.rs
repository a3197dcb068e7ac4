//! CSV input helpers: `#` comments, trimmed fields, and parse errors that
//! name the physical line.

use serde::de::DeserializeOwned;

use crate::{Error, Result};

/// A CSV table with `#` comments and blank lines skipped. Record indices
/// from the csv reader are mapped back to physical 1-based line numbers
/// (its own line counter skips comment and empty lines).
pub struct Table {
    data_lines: Vec<usize>,
    body: String,
}

impl Table {
    pub fn new(text: &str) -> Self {
        let mut data_lines = Vec::new();
        let mut body = String::new();
        for (k, l) in text.lines().enumerate() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            data_lines.push(k + 1);
            body.push_str(l);
            body.push('\n');
        }
        Self { data_lines, body }
    }

    pub fn reader(&self) -> csv::Reader<&[u8]> {
        csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(self.body.as_bytes())
    }

    /// Physical line of csv record `record` (the header is record 0).
    pub fn line(&self, record: u64) -> usize {
        self.data_lines.get(record as usize).copied().unwrap_or_else(|| self.data_lines.last().map_or(1, |l| l + 1))
    }

    pub fn header_line(&self) -> usize {
        self.line(0)
    }

    pub fn error(&self, e: &csv::Error) -> Error {
        let line = e.position().map_or(0, |p| self.line(p.record()));
        let message = match e.kind() {
            csv::ErrorKind::Deserialize { err, .. } => match err.field() {
                Some(k) => format!("field {}: {}", k + 1, err.kind()),
                None => err.kind().to_string(),
            },
            _ => e.to_string(),
        };
        Error::Parse { line, message }
    }
}

/// Rows deserialized by header name.
pub fn read_rows<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let table = Table::new(text);
    let mut r = table.reader();
    r.deserialize().map(|row| row.map_err(|e| table.error(&e))).collect()
}
