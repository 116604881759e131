//! Report files: a fixed-column CSV of trial records and a versioned JSON
//! envelope holding the config, records and bound verdicts.
//!
//! The emitted bytes are a pure function of the records, so identical runs
//! produce identical files. JSON reports are checked against the shipped
//! schema before they are trusted.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{BoundCheck, ExperimentConfig, TrialRecord};
use crate::envelope::Method;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON Schema the report format is pinned to; shipped with the crate.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const CSV_HEADER: &str = "method,seed,n_keys,n_tuples,epsilon,key,tau,alpha_s,overflow_b,\
                              mu,query_error,query_overhead,index_size_bits,data_overhead";

/// Full benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub checks: Vec<BoundCheck>,
}

impl Report {
    pub fn new(config: ExperimentConfig, records: Vec<TrialRecord>, checks: Vec<BoundCheck>) -> Self {
        Report { schema_version: REPORT_SCHEMA_VERSION, config, records, checks }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a JSON report after validating it against the shipped schema.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        validate_report_json(&value)?;
        let report: Report = serde_json::from_value(value)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::MalformedFile {
                what: "report",
                reason: format!("unsupported schema_version {}", report.schema_version),
            });
        }
        Ok(report)
    }
}

/// Output flavor for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid_parameter(
                "format",
                format!("unknown report format {other:?}; expected csv or json"),
            )),
        }
    }
}

/// Writes the report to `path`: the record table as CSV, or the full
/// envelope as JSON.
pub fn emit_report(
    records: &[TrialRecord],
    checks: &[BoundCheck],
    config: &ExperimentConfig,
    format: ReportFormat,
    path: &Path,
) -> Result<()> {
    let contents = match format {
        ReportFormat::Csv => records_to_csv(records),
        ReportFormat::Json => {
            Report::new(config.clone(), records.to_vec(), checks.to_vec()).to_json_string()?
        }
    };
    std::fs::write(path, contents)?;
    Ok(())
}

/// Fixed-column CSV; an empty record list yields just the header.
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 72);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.seed,
            r.n_keys,
            r.n_tuples,
            r.epsilon,
            r.key,
            r.tau,
            r.alpha_s,
            r.overflow_b,
            r.mu,
            r.query_error,
            r.query_overhead,
            r.index_size_bits,
            r.data_overhead
        ));
    }
    out
}

/// Parses a CSV produced by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::MalformedFile {
        what: "csv report",
        reason: "missing header".to_string(),
    })?;
    if header != CSV_HEADER {
        return Err(Error::MalformedFile {
            what: "csv report",
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(Error::MalformedFile {
                what: "csv report",
                reason: format!("line {}: expected 14 fields, got {}", lineno + 2, fields.len()),
            });
        }
        let parse_err = |what: &str| Error::MalformedFile {
            what: "csv report",
            reason: format!("line {}: bad {what}", lineno + 2),
        };
        records.push(TrialRecord {
            method: fields[0].parse::<Method>()?,
            seed: fields[1].parse().map_err(|_| parse_err("seed"))?,
            n_keys: fields[2].parse().map_err(|_| parse_err("n_keys"))?,
            n_tuples: fields[3].parse().map_err(|_| parse_err("n_tuples"))?,
            epsilon: fields[4].parse().map_err(|_| parse_err("epsilon"))?,
            key: fields[5].parse().map_err(|_| parse_err("key"))?,
            tau: fields[6].parse().map_err(|_| parse_err("tau"))?,
            alpha_s: fields[7].parse().map_err(|_| parse_err("alpha_s"))?,
            overflow_b: fields[8].parse().map_err(|_| parse_err("overflow_b"))?,
            mu: fields[9].parse().map_err(|_| parse_err("mu"))?,
            query_error: fields[10].parse().map_err(|_| parse_err("query_error"))?,
            query_overhead: fields[11].parse().map_err(|_| parse_err("query_overhead"))?,
            index_size_bits: fields[12].parse().map_err(|_| parse_err("index_size_bits"))?,
            data_overhead: fields[13].parse().map_err(|_| parse_err("data_overhead"))?,
            wall_time: Duration::ZERO,
        });
    }
    Ok(records)
}

/// Validates a JSON value against the shipped report schema. Supports the
/// schema subset the report format uses: type, required, properties, items
/// and enum.
pub fn validate_report_json(doc: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("shipped schema parses");
    validate_node(doc, &schema, "$")
}

fn schema_error(path: &str, reason: String) -> Error {
    Error::MalformedFile { what: "report", reason: format!("{path}: {reason}") }
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => {
            value.is_i64()
                || value.is_u64()
                || value.as_f64().is_some_and(|f| f.fract() == 0.0 && f.is_finite())
        }
        _ => false,
    }
}

fn validate_node(value: &Value, schema: &Value, path: &str) -> Result<()> {
    if let Some(expected) = schema.get("type") {
        let types: Vec<&str> = match expected {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        if !types.iter().any(|t| type_matches(value, t)) {
            return Err(schema_error(path, format!("expected type {types:?}")));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(schema_error(path, format!("value {value} not in enum")));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for name in required.iter().filter_map(Value::as_str) {
            if value.get(name).is_none() {
                return Err(schema_error(path, format!("missing required field {name:?}")));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = value.as_object() {
            for (name, sub) in props {
                if let Some(field) = obj.get(name) {
                    validate_node(field, sub, &format!("{path}.{name}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(list) = value.as_array() {
            for (i, item) in list.iter().enumerate() {
                validate_node(item, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
