//! Report envelope and its JSON / CSV encodings.
//!
//! JSON objects are emitted with sorted keys and floats in shortest
//! round-trip form, so equal runs give equal bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{CommandName, Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "chaining";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn new(name: &str, passed: bool) -> Verdict {
        Verdict { name: name.into(), passed, detail: None }
    }

    pub fn with_detail(name: &str, passed: bool, detail: impl Into<String>) -> Verdict {
        Verdict { name: name.into(), passed, detail: Some(detail.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub seed: u64,
    /// How per-draw generators are derived from `seed`.
    pub scheme: String,
}

impl SeedProvenance {
    pub fn new(seed: u64) -> SeedProvenance {
        SeedProvenance { seed, scheme: "chacha8(seed, stream, index) counter streams".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub tool: String,
    pub version: String,
    pub command: CommandName,
    /// The effective configuration; feeding it back reproduces the run.
    pub config: RunConfig,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub seeds: SeedProvenance,
    pub results: Value,
    /// Result section written first in CSV output.
    pub primary_table: Option<String>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

impl ReportEnvelope {
    pub fn new(config: RunConfig, command: CommandName, results: Value, primary_table: Option<&str>, verdicts: Vec<Verdict>) -> ReportEnvelope {
        let passed = verdicts.iter().all(|v| v.passed);
        ReportEnvelope {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seeds: SeedProvenance::new(config.seed),
            config,
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
            results,
            primary_table: primary_table.map(String::from),
            verdicts,
            passed,
        }
    }
}

/// Pretty JSON with sorted object keys.
pub fn to_canonical_json(envelope: &ReportEnvelope) -> CliResult<String> {
    // `Value` maps are ordered, so a round trip through `Value` sorts every object.
    let value = serde_json::to_value(envelope).map_err(|e| CliError::Config(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One CSV table: ordered column names and stringified cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Null => {
            out.insert(prefix.into(), String::new());
        }
        Value::String(s) => {
            out.insert(prefix.into(), s.clone());
        }
        other => {
            out.insert(prefix.into(), other.to_string());
        }
    }
}

/// Every top-level array of objects in `results` becomes a table; nested
/// objects flatten to dotted columns and arrays to JSON text.
pub fn tables(results: &Value) -> Vec<Table> {
    let Value::Object(map) = results else { return Vec::new() };
    let mut out = Vec::new();
    for (name, v) in map {
        let Value::Array(items) = v else { continue };
        if items.is_empty() || !items.iter().all(Value::is_object) {
            continue;
        }
        let flat: Vec<BTreeMap<String, String>> = items
            .iter()
            .map(|item| {
                let mut row = BTreeMap::new();
                if let Value::Object(m) = item {
                    for (k, x) in m {
                        match x {
                            Value::Array(_) => {
                                row.insert(k.clone(), x.to_string());
                            }
                            _ => flatten(k, x, &mut row),
                        }
                    }
                }
                row
            })
            .collect();
        let mut columns: Vec<String> = flat.iter().flat_map(|r| r.keys().cloned()).collect();
        columns.sort();
        columns.dedup();
        let rows = flat.iter().map(|r| columns.iter().map(|c| r.get(c).cloned().unwrap_or_default()).collect()).collect();
        out.push(Table { name: name.clone(), columns, rows });
    }
    out
}

fn write_table(path: &Path, t: &Table) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(&t.columns).map_err(|e| CliError::io(path, e))?;
    for row in &t.rows {
        w.write_record(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn sibling(path: &Path, section: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}-{section}.csv"))
}

/// Writes the envelope. CSV puts the primary table at `path` and every other
/// table next to it as `<stem>-<section>.csv`; the returned list names all files.
pub fn emit_report(envelope: &ReportEnvelope, path: Option<&Path>, format: Format) -> CliResult<Vec<PathBuf>> {
    match (format, path) {
        (Format::Json, None) => {
            print!("{}", to_canonical_json(envelope)?);
            Ok(Vec::new())
        }
        (Format::Json, Some(p)) => {
            std::fs::write(p, to_canonical_json(envelope)?).map_err(|e| CliError::io(p, e))?;
            Ok(vec![p.to_path_buf()])
        }
        (Format::Csv, None) => Err(CliError::Config("CSV output needs --out".into())),
        (Format::Csv, Some(p)) => {
            let mut all = tables(&envelope.results);
            let verdicts = Table {
                name: "verdicts".into(),
                columns: vec!["name".into(), "passed".into(), "detail".into()],
                rows: envelope
                    .verdicts
                    .iter()
                    .map(|v| vec![v.name.clone(), v.passed.to_string(), v.detail.clone().unwrap_or_default()])
                    .collect(),
            };
            let primary = envelope
                .primary_table
                .as_ref()
                .and_then(|name| all.iter().position(|t| &t.name == name))
                .map(|k| all.remove(k))
                .unwrap_or(verdicts.clone());
            let mut written = vec![p.to_path_buf()];
            write_table(p, &primary)?;
            if primary.name != "verdicts" {
                all.push(verdicts);
            }
            for t in &all {
                let q = sibling(p, &t.name);
                write_table(&q, t)?;
                written.push(q);
            }
            Ok(written)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tables_flatten_nested_rows() {
        let v = json!({"rows": [{"a": 1, "b": {"c": 2.5}}, {"a": 2, "b": {"c": null}, "d": [1, 2]}], "scalar": 3});
        let t = tables(&v);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].columns, vec!["a", "b.c", "d"]);
        assert_eq!(t[0].rows[1], vec!["2", "", "[1,2]"]);
    }

    #[test]
    fn envelope_round_trips_bit_exactly() {
        let cfg = RunConfig { command: Some(CommandName::Jl), p: 0.1 + 0.2, ..RunConfig::default() };
        let env = ReportEnvelope::new(cfg, CommandName::Jl, json!({"x": 1.0 / 3.0, "y": [1e-300, 2.5e17]}), None, vec![Verdict::new("ok", true)]);
        let text = to_canonical_json(&env).unwrap();
        let back: ReportEnvelope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, env);
        assert_eq!(to_canonical_json(&back).unwrap(), text);
    }
}
