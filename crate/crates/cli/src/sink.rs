//! Row-oriented result writer.
//!
//! CSV output starts with a `# randcert <command> v<version>` line followed by the
//! column header. JSON output is one object per line: a schema record first, then
//! one record per row with the same keys as the CSV columns. Every row is flushed
//! as soon as it is written.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }

    /// Space-separated integer list.
    pub fn ints(v: &[usize]) -> Self {
        Cell::Text(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
    }

    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{:.10}", x + 0.0),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => json!(x + 0.0),
            Cell::Int(x) => json!(x),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

enum Format {
    Csv(csv::Writer<Box<dyn Write>>),
    Json(Box<dyn Write>),
}

pub struct Sink {
    columns: Vec<&'static str>,
    format: Format,
    rows: usize,
}

impl Sink {
    /// Writes to `path` (JSON lines when the extension is `json` or `jsonl`, CSV otherwise) or to stdout.
    pub fn open(path: Option<&Path>, command: &str, columns: &[&'static str]) -> Result<Self, CliError> {
        let is_json = path.and_then(|p| p.extension()).is_some_and(|e| e == "json" || e == "jsonl");
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
            None => Box::new(io::stdout()),
        };
        let mut sink = if is_json {
            let mut out = out;
            let head = json!({ "schema": format!("randcert {command}"), "version": SCHEMA_VERSION, "columns": columns });
            writeln!(out, "{head}").map_err(CliError::write)?;
            Sink { columns: columns.to_vec(), format: Format::Json(out), rows: 0 }
        } else {
            let mut out = out;
            writeln!(out, "# randcert {command} v{SCHEMA_VERSION}").map_err(CliError::write)?;
            let mut w = csv::WriterBuilder::new().from_writer(out);
            w.write_record(columns).map_err(|e| CliError::write(e.into()))?;
            Sink { columns: columns.to_vec(), format: Format::Csv(w), rows: 0 }
        };
        sink.flush()?;
        Ok(sink)
    }

    pub fn write(&mut self, row: &[Cell]) -> Result<(), CliError> {
        assert_eq!(row.len(), self.columns.len(), "row width");
        match &mut self.format {
            Format::Csv(w) => {
                w.write_record(row.iter().map(Cell::csv)).map_err(|e| CliError::write(e.into()))?;
            }
            Format::Json(w) => {
                let obj: Map<String, Value> = self.columns.iter().zip(row).map(|(k, c)| (k.to_string(), c.json())).collect();
                writeln!(w, "{}", Value::Object(obj)).map_err(CliError::write)?;
            }
        }
        self.rows += 1;
        self.flush()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn flush(&mut self) -> Result<(), CliError> {
        match &mut self.format {
            Format::Csv(w) => w.flush(),
            Format::Json(w) => w.flush(),
        }
        .map_err(CliError::write)
    }
}
