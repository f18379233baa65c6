//! Plain-text output helpers: CSV with `#` metadata lines, JSON with an
//! embedded `meta` object, and the flat `key=value` configuration format.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{self, Write};

/// Crate version written into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format a float with 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Resolved configuration attached to each output artifact.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Meta {
            tool: "al-lab".to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            config,
        }
    }

    fn write_comments<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# {} {} {}", self.tool, self.version, self.command)?;
        for (k, v) in &self.config {
            writeln!(w, "# {}={}", k, v)?;
        }
        Ok(())
    }
}

/// Column-oriented CSV writer with a `#` comment preamble.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, meta: Option<&Meta>, columns: &[&str]) -> io::Result<Self> {
        if let Some(m) = meta {
            m.write_comments(&mut out)?;
        }
        writeln!(out, "{}", columns.join(","))?;
        Ok(CsvWriter {
            out,
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.out, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Serialize `value` as pretty JSON, inserting `meta` as a top-level key.
pub fn json_with_meta<T: serde::Serialize>(value: &T, meta: &Meta) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    let meta_v = serde_json::to_value(meta)?;
    match &mut v {
        serde_json::Value::Object(map) => {
            map.insert("meta".to_string(), meta_v);
        }
        other => {
            let inner = other.take();
            let mut map = serde_json::Map::new();
            map.insert("meta".to_string(), meta_v);
            map.insert("data".to_string(), inner);
            v = serde_json::Value::Object(map);
        }
    }
    serde_json::to_string_pretty(&v)
}

/// Data rows of a CSV text, skipping `#` comments and the column header.
pub fn csv_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::trim).collect())
        .collect()
}

/// Parse a flat `key=value` file. Blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "config line {}: empty key",
                lineno + 1
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}
