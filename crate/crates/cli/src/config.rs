//! `--config` handling: JSON files and `key=value` overrides layered over
//! the defaults of a config struct.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Applies each spec in order to `base`. A spec naming an existing file is
/// read as a JSON object; otherwise it must be `key=value`, where dotted keys
/// address nested objects and the value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn merge_config<C: Serialize + DeserializeOwned>(base: &C, specs: &[String]) -> Result<C> {
    let mut value = serde_json::to_value(base)?;
    for spec in specs {
        if Path::new(spec).is_file() {
            let text = std::fs::read_to_string(spec).with_context(|| format!("reading config {spec}"))?;
            let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {spec}"))?;
            if !patch.is_object() {
                bail!("config file {spec} must hold a JSON object");
            }
            merge(&mut value, patch);
        } else if let Some((key, raw)) = spec.split_once('=') {
            let leaf = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut patch = leaf;
            for part in key.trim().rsplit('.') {
                let mut m = Map::new();
                m.insert(part.to_string(), patch);
                patch = Value::Object(m);
            }
            merge(&mut value, patch);
        } else {
            bail!("--config {spec:?} is neither a file nor key=value");
        }
    }
    serde_json::from_value(value).context("invalid configuration")
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
