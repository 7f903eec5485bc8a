//! Output formatting. Every number is rounded to 12 significant digits so
//! repeated runs can be diffed byte for byte.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = Value::from(round12(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// A command's result in both output shapes.
pub struct Report {
    /// Members of the JSON document besides `command` and `config`.
    pub json: Value,
    /// CSV records; the field order of the row type fixes the column order.
    pub csv: Vec<u8>,
}

impl Report {
    pub fn new<R: Serialize>(json: Value, rows: &[R]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let csv = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(Self { json, csv })
    }
}

pub fn emit(config: &RunConfig, report: &Report) -> Result<(), CliError> {
    let bytes = match config.format {
        Format::Csv => report.csv.clone(),
        Format::Json => {
            let mut body = report.json.clone();
            round_value(&mut body);
            let mut doc = serde_json::Map::new();
            doc.insert("command".into(), serde_json::to_value(config.command)?);
            // the config is kept verbatim so it can be fed back in unchanged
            doc.insert("config".into(), serde_json::to_value(config)?);
            if let Value::Object(fields) = body {
                doc.extend(fields);
            }
            let mut out = serde_json::to_vec_pretty(&Value::Object(doc))?;
            out.push(b'\n');
            out
        }
    };
    write_to(config.output_path.as_deref(), &bytes)
}

pub fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)?.write_all(bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}
