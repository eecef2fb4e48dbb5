//! JSON schemas shipped with the tool, used to check inputs at ingestion.
//! Output schemas are shipped for downstream consumers and tests.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use jsonschema::JSONSchema;
use serde_json::Value;

pub const RUN_CONFIG: &str = include_str!("../schemas/run_config.schema.json");
pub const TRACE_SIDECAR: &str = include_str!("../schemas/trace_sidecar.schema.json");
pub const DATASET: &str = include_str!("../schemas/dataset.schema.json");
pub const TRACE_REPORT: &str = include_str!("../schemas/trace_report.schema.json");
pub const FIT_REPORT: &str = include_str!("../schemas/fit_report.schema.json");
pub const FILMS_REPORT: &str = include_str!("../schemas/films_report.schema.json");
pub const FAILURES: &str = include_str!("../schemas/failures.schema.json");
pub const SUMMARY: &str = include_str!("../schemas/summary.schema.json");

/// Every shipped schema by file name.
pub const ALL: [(&str, &str); 8] = [
    ("run_config.schema.json", RUN_CONFIG),
    ("trace_sidecar.schema.json", TRACE_SIDECAR),
    ("dataset.schema.json", DATASET),
    ("trace_report.schema.json", TRACE_REPORT),
    ("fit_report.schema.json", FIT_REPORT),
    ("films_report.schema.json", FILMS_REPORT),
    ("failures.schema.json", FAILURES),
    ("summary.schema.json", SUMMARY),
];

const MAX_REPORTED: usize = 5;

fn compiled(schema: &'static str) -> &'static JSONSchema {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static JSONSchema>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("schema cache");
    map.entry(schema.as_ptr() as usize).or_insert_with(|| {
        let value: Value = serde_json::from_str(schema).expect("shipped schema is valid JSON");
        let compiled = JSONSchema::compile(&value).expect("shipped schema compiles");
        Box::leak(Box::new(compiled))
    })
}

/// Checks `instance` against a shipped schema. The error lists up to five
/// violations, each with its JSON pointer.
pub fn validate(schema: &'static str, instance: &Value) -> Result<(), String> {
    let result = compiled(schema).validate(instance);
    match result {
        Ok(()) => Ok(()),
        Err(errors) => {
            let messages: Vec<String> = errors
                .take(MAX_REPORTED)
                .map(|e| {
                    let at = e.instance_path.to_string();
                    let at = if at.is_empty() { "/".to_string() } else { at };
                    format!("at {at}: {e}")
                })
                .collect();
            Err(messages.join("; "))
        }
    }
}
