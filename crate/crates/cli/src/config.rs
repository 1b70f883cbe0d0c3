//! Optional JSON config file. Top-level keys `seed`, `out` and `quiet` mirror
//! the global flags; a key named after a subcommand holds that command's
//! options. Command-line flags override the file.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub fn load(path: Option<&Path>) -> Result<Value> {
    match path {
        None => Ok(Value::Object(Map::new())),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            anyhow::ensure!(v.is_object(), "config file must hold a JSON object");
            Ok(v)
        }
    }
}

/// Deep-merge the set (non-null) fields of `flags` over `section`, then
/// deserialize; absent fields fall back to the target's serde defaults.
pub fn resolve<F: Serialize, T: DeserializeOwned>(section: Option<&Value>, flags: &F) -> Result<T> {
    let mut merged = match section {
        Some(v @ Value::Object(_)) => v.clone(),
        Some(Value::Null) | None => Value::Object(Map::new()),
        Some(_) => anyhow::bail!("config section must be an object"),
    };
    overlay(&mut merged, serde_json::to_value(flags)?);
    serde_json::from_value(merged).context("invalid configuration")
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ if v.is_null() => {}
                    _ => {
                        let mut fresh = Value::Object(Map::new());
                        if v.is_object() {
                            overlay(&mut fresh, v);
                        } else {
                            fresh = v;
                        }
                        b.insert(k, fresh);
                    }
                }
            }
        }
        (b, t) if !t.is_null() => *b = t,
        _ => {}
    }
}
