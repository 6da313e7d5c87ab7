//! Versioned CSV and JSON writers.

use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

/// Columns whose values depend on the machine rather than the config.
pub const VOLATILE_COLUMNS: [&str; 1] = ["wall_ms"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&'static str]) -> Table {
        Table { schema: schema.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// CSV: two `#` metadata lines (schema and resolved config), header, rows.
pub fn write_csv<W: Write>(mut out: W, table: &Table, config: &Value) -> Result<()> {
    writeln!(out, "# schema={} version={SCHEMA_VERSION}", table.schema)?;
    writeln!(out, "# config={}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, table: &Table, config: &Value) -> Result<()> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Object(table.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
        .collect();
    let doc = json!({
        "schema": table.schema,
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "columns": table.columns,
        "rows": rows,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn write<W: Write>(out: W, format: Format, table: &Table, config: &Value) -> Result<()> {
    match format {
        Format::Csv => write_csv(out, table, config),
        Format::Json => write_json(out, table, config),
    }
    .context("writing output")
}

/// Data rows of a CSV produced by [`write_csv`] with volatile columns blanked.
pub fn stable_csv_rows(text: &str) -> Vec<Vec<String>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().cloned().unwrap_or_default();
    let skip: Vec<bool> = header.iter().map(|h| VOLATILE_COLUMNS.contains(&h)).collect();
    r.records()
        .filter_map(|rec| rec.ok())
        .map(|rec| rec.iter().zip(&skip).map(|(v, &s)| if s { String::new() } else { v.to_string() }).collect())
        .collect()
}
