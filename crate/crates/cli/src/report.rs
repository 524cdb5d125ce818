use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{CliResult, Failure};

/// Report object seeded with the provenance fields every report carries.
pub fn provenance(invocation: &[String], seed: Option<u64>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool_version".into(), json!(mirkit::VERSION));
    m.insert("invocation".into(), json!(invocation));
    m.insert("seed".into(), json!(seed));
    m
}

/// Pretty JSON to `path`, or stdout when absent.
pub fn emit(report: Map<String, Value>, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&Value::Object(report)).expect("serializable report") + "\n";
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
