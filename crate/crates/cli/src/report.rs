use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Fixtures compiled into the binary.
pub const FIXTURES: &[(&str, &str)] = &[
    ("qubit_zero.json", include_str!("../fixtures/qubit_zero.json")),
    ("qubit_max_mixed.json", include_str!("../fixtures/qubit_max_mixed.json")),
    ("qubit_diag_3_1.json", include_str!("../fixtures/qubit_diag_3_1.json")),
    ("sharp_mub_pair.json", include_str!("../fixtures/sharp_mub_pair.json")),
    ("gbit.json", include_str!("../fixtures/gbit.json")),
    ("gbit_vertex.json", include_str!("../fixtures/gbit_vertex.json")),
    ("gbit_coordinate_pair.json", include_str!("../fixtures/gbit_coordinate_pair.json")),
    ("result1.json", include_str!("../fixtures/result1.json")),
    ("result1_single_object.json", include_str!("../fixtures/result1_single_object.json")),
    ("result2.json", include_str!("../fixtures/result2.json")),
    ("result3.json", include_str!("../fixtures/result3.json")),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Where an input comes from.
#[derive(Debug, Clone)]
pub enum Source {
    File(PathBuf),
    Builtin(&'static str),
}

impl Source {
    pub fn or_builtin(path: &Option<PathBuf>, name: &'static str) -> Self {
        match path {
            Some(p) => Source::File(p.clone()),
            None => Source::Builtin(name),
        }
    }
}

/// Reads inputs and remembers their content hashes.
#[derive(Debug, Default)]
pub struct Inputs {
    records: BTreeMap<String, Value>,
}

impl Inputs {
    pub fn read(&mut self, role: &str, src: &Source) -> Result<String, CliError> {
        let (label, text) = match src {
            Source::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read {role} file {}: {e}", p.display())))?;
                (p.display().to_string(), text)
            }
            Source::Builtin(name) => {
                let text = fixture(name).ok_or_else(|| CliError::usage(format!("no bundled fixture {name}")))?;
                (format!("builtin:{name}"), text.to_string())
            }
        };
        self.records.insert(
            role.to_string(),
            json!({ "path": label, "sha256": hex::encode(Sha256::digest(text.as_bytes())) }),
        );
        Ok(text)
    }

    pub fn to_json(&self) -> Value {
        json!(self.records)
    }
}

/// Wall-clock data kept apart from everything that must be reproducible.
pub struct Clock {
    start: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }

    pub fn stamp(&self, timings: Value) -> Value {
        let unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        json!({
            "unix_ms": unix_ms,
            "elapsed_ms": self.start.elapsed().as_secs_f64() * 1e3,
            "timings": timings,
        })
    }
}

/// Report envelope: the result fields plus provenance of the run.
pub fn envelope(command: &str, cfg: &ExperimentConfig, inputs: &Inputs, result: Value, timestamp: Value) -> Value {
    let mut out = match result {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    out.insert("schema_version".into(), json!(SCHEMA_VERSION));
    out.insert("command".into(), json!(command));
    out.insert("config".into(), cfg.to_json());
    out.insert("inputs".into(), inputs.to_json());
    out.insert("timestamp".into(), timestamp);
    Value::Object(out)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(value: &Value, path: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data");
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_is_valid_json() {
        for (name, text) in FIXTURES {
            assert!(serde_json::from_str::<Value>(text).is_ok(), "{name}");
        }
    }

    #[test]
    fn builtin_inputs_are_hashed() {
        let mut inputs = Inputs::default();
        inputs.read("state", &Source::Builtin("qubit_zero.json")).unwrap();
        let rec = &inputs.to_json()["state"];
        assert_eq!(rec["path"], "builtin:qubit_zero.json");
        assert_eq!(rec["sha256"].as_str().unwrap().len(), 64);
    }
}
