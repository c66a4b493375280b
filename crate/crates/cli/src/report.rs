//! JSON reports. Every report carries the operation name, the effective
//! configuration, its hash and the seed; `wall_time_ms` is the only field
//! that varies between identical runs.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TIMING_KEY: &str = "wall_time_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, limit: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= limit,
            Relation::AtLeast => value >= limit,
            Relation::Below => value < limit,
        };
        Self {
            name: name.into(),
            value,
            relation,
            limit,
            passed,
        }
    }

    /// A yes/no condition, stored as 1/0 against `>= 1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub operation: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Value,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    pub wall_time_ms: u64,
}

impl Report {
    pub fn new(operation: &str, seed: u64, config: Value, checks: Vec<Check>, result: Value, error: Option<String>) -> Self {
        let passed = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed);
        Self {
            operation: operation.into(),
            seed,
            config_hash: hash_value(&config),
            config,
            passed,
            checks,
            error,
            result: strip_timing(result),
            wall_time_ms: 0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

/// SHA-256 of the compact JSON rendering.
pub fn hash_value(v: &Value) -> String {
    format!("{:x}", Sha256::digest(v.to_string().as_bytes()))
}

/// Drops every `wall_time_ms` key below the top level.
pub fn strip_timing(mut v: Value) -> Value {
    fn walk(v: &mut Value) {
        match v {
            Value::Object(m) => {
                m.remove(TIMING_KEY);
                m.values_mut().for_each(walk);
            }
            Value::Array(a) => a.iter_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}

/// Report text with every timing field removed, for reproducibility checks.
pub fn without_timing(json: &str) -> serde_json::Result<String> {
    let v: Value = serde_json::from_str(json)?;
    Ok(strip_timing(v).to_string())
}
