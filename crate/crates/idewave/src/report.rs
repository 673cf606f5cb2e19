//! JSON documents and the metadata header shared by every output.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use idewave_core::Grid;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub n: usize,
}

impl From<Grid> for GridInfo {
    fn from(g: Grid) -> Self {
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            dx: g.dx(),
            n: g.len(),
        }
    }
}

/// Provenance of an output: everything needed to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    /// Position in a sweep config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
    pub grid: GridInfo,
    pub tolerances: Map<String, Value>,
}

impl Metadata {
    pub fn new(
        command: &'static str,
        config_sha256: &str,
        entry: Option<usize>,
        grid: Grid,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: config_sha256.to_owned(),
            entry,
            grid: grid.into(),
            tolerances: Map::new(),
        }
    }

    pub fn tolerance(mut self, key: &str, value: impl Serialize) -> Self {
        self.tolerances.insert(
            key.to_owned(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    /// `(key, value)` pairs for CSV comment lines.
    pub fn comment_lines(&self) -> Vec<(String, String)> {
        let mut lines = vec![
            ("tool".into(), self.tool.into()),
            ("version".into(), self.version.into()),
            ("command".into(), self.command.into()),
            ("config_sha256".into(), self.config_sha256.clone()),
        ];
        if let Some(i) = self.entry {
            lines.push(("entry".into(), i.to_string()));
        }
        let g = &self.grid;
        lines.push((
            "grid".into(),
            format!("x_min={} x_max={} dx={} n={}", g.x_min, g.x_max, g.dx, g.n),
        ));
        for (k, v) in &self.tolerances {
            lines.push((k.clone(), v.to_string()));
        }
        lines
    }
}

/// Pretty-printed JSON to `path`, or to stdout when `path` is `None`.
pub fn emit_json(path: Option<&Path>, doc: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Io(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}
