use crate::config::{Format, RunConfig};
use crate::{usage, Result};
use serde_json::Value;
use std::io::Write;

pub const SCHEMA_VERSION: u32 = 1;

/// A command's result: a JSON document plus, when the command has a
/// natural table, its CSV rows.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// Format used when none is requested.
    pub default_format: Format,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn json(json: Value) -> Self {
        Self { json, table: None, default_format: Format::Json }
    }
}

/// Stamps every JSON report with the schema version, command and seed.
pub fn stamp(cfg: &RunConfig, mut body: Value) -> Value {
    if let Value::Object(map) = &mut body {
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
        map.insert("command".into(), cfg.command.name().into());
        map.insert("seed".into(), cfg.seed.into());
    }
    body
}

fn render(cfg: &RunConfig, report: &Report) -> Result<Vec<u8>> {
    match cfg.format.unwrap_or(report.default_format) {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&report.json).expect("reports serialize");
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let table = report
                .table
                .as_ref()
                .ok_or_else(|| usage(format!("command {} has no CSV form", cfg.command.name())))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| crate::CliError::Io(std::io::Error::other(e));
            w.write_record(&table.header).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| crate::CliError::Io(std::io::Error::other(e.to_string())))
        }
    }
}

pub fn write(cfg: &RunConfig, report: &Report) -> Result<()> {
    let bytes = render(cfg, report)?;
    match &cfg.output {
        Some(path) if path.as_os_str() != "-" => std::fs::write(path, bytes)?,
        _ => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
