use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }
}

pub struct Report {
    pub command: String,
    pub config: Map<String, Value>,
    pub cite: Option<&'static str>,
    pub timestamp: Option<u64>,
    pub results: Map<String, Value>,
    pub table: Option<Table>,
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            config: Map::new(),
            cite: None,
            timestamp: None,
            results: Map::new(),
            table: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.render_json(),
            Format::Csv => self.render_csv(),
            Format::Text => self.render_text(),
        }
    }

    fn render_json(&self) -> String {
        let mut root = Map::new();
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("config".into(), Value::Object(self.config.clone()));
        if let Some(c) = self.cite {
            root.insert("cite".into(), c.into());
        }
        if let Some(t) = self.timestamp {
            root.insert("timestamp".into(), t.into());
        }
        root.insert("results".into(), Value::Object(self.results.clone()));
        if let Some(t) = &self.table {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    Value::Object(t.header.iter().cloned().zip(r.iter().cloned()).collect())
                })
                .collect();
            root.insert("table".into(), Value::Array(rows));
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("values serialize");
        s.push('\n');
        s
    }

    fn header_lines(&self, prefix: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{prefix}sgap {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(out, "{prefix}{k} = {}", plain(v));
        }
        if let Some(c) = self.cite {
            let _ = writeln!(out, "{prefix}cite: {c}");
        }
        if let Some(t) = self.timestamp {
            let _ = writeln!(out, "{prefix}timestamp = {t}");
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = self.header_lines("# ");
        match &self.table {
            Some(t) => {
                for (k, v) in &self.results {
                    let _ = writeln!(out, "# {k} = {}", plain(v));
                }
                let _ = writeln!(out, "{}", t.header.join(","));
                for r in &t.rows {
                    let cells: Vec<String> = r.iter().map(|v| csv_field(&plain(v))).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
            }
            None => {
                out.push_str("key,value\n");
                for (k, v) in &self.results {
                    let _ = writeln!(out, "{k},{}", csv_field(&plain(v)));
                }
            }
        }
        out
    }

    fn render_text(&self) -> String {
        let mut out = self.header_lines("");
        out.push('\n');
        let width = self.results.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in &self.results {
            let _ = writeln!(out, "{k:<width$}  {}", plain(v));
        }
        if let Some(t) = &self.table {
            out.push('\n');
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(plain).collect()).collect();
            let widths: Vec<usize> = (0..t.header.len())
                .map(|i| {
                    cells
                        .iter()
                        .map(|r| r[i].len())
                        .chain([t.header[i].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |row: &[String]| -> String {
                row.iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(out, "{}", line(&t.header));
            for r in &cells {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        out
    }
}
