//! Reports and their JSON / CSV emission.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

pub type Row = Map<String, Value>;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub library_version: String,
    pub inputs: Map<String, Value>,
    pub outputs: Vec<Row>,
    /// Wall-clock seconds; only present with `--timing`, so that reports are
    /// otherwise reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl Report {
    pub fn new(command: Vec<String>) -> Self {
        Report {
            command,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Map::new(),
            outputs: Vec::new(),
            seconds: None,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Serialize) {
        self.inputs.insert(key.to_string(), to_value(value));
    }

    pub fn push(&mut self, row: Row) {
        self.outputs.push(row);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports are plain data");
        s.push('\n');
        s
    }

    /// One CSV row per output row; columns are the union of keys in first-seen order.
    pub fn to_csv(&self) -> io::Result<String> {
        let mut columns: Vec<&str> = Vec::new();
        for row in &self.outputs {
            for key in row.keys() {
                if !columns.contains(&key.as_str()) {
                    columns.push(key);
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&columns)?;
        for row in &self.outputs {
            w.write_record(columns.iter().map(|c| row.get(*c).map(cell).unwrap_or_default()))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 cells"))
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).expect("reports are plain data")
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Builds a row from (column, value) pairs.
#[macro_export]
macro_rules! row {
    ($($key:expr => $value:expr),* $(,)?) => {{
        let mut r = $crate::report::Row::new();
        $( r.insert($key.to_string(), serde_json::to_value($value).expect("plain data")); )*
        r
    }};
}

/// Writes to `path` through a temporary file in the same directory and a rename,
/// so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
