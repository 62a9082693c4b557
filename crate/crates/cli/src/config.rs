//! Config loading: JSON file, `--set` overrides, `RISKRL_SEED`.

use std::path::Path;

use riskrl_core::harness::StudyConfig;
use serde_json::Value;

use crate::CliError;

pub const SEED_ENV: &str = "RISKRL_SEED";

/// Reads `path`, applies overrides in order, then the seed from the
/// environment, and parses the result.
pub fn load(path: &Path, overrides: &[String], env_seed: Option<&str>) -> Result<StudyConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    if let Some(seed) = env_seed {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV} must be an unsigned integer (got {seed:?})")))?;
        set_path(&mut doc, &["master_seed"], &Value::from(seed))?;
    }
    resolve_mdp_path(&mut doc, path.parent().unwrap_or(Path::new(".")));
    serde_json::from_value(doc).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Relative `file` MDP paths are taken relative to the config's directory.
fn resolve_mdp_path(doc: &mut Value, base: &Path) {
    let Some(mdp) = doc.get_mut("mdp").and_then(Value::as_object_mut) else {
        return;
    };
    if mdp.get("kind").and_then(Value::as_str) != Some("file") {
        return;
    }
    if let Some(Value::String(p)) = mdp.get_mut("path") {
        if Path::new(p.as_str()).is_relative() {
            *p = base.join(&*p).to_string_lossy().into_owned();
        }
    }
}

/// `key.path=value`. The value is parsed as JSON when possible and taken as
/// a string otherwise. A key segment that meets an array is applied to every
/// element; a numeric segment indexes into it.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override {spec:?} has an empty key segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    set_path(doc, &segments, &value)
}

fn set_path(node: &mut Value, segments: &[&str], value: &Value) -> Result<(), CliError> {
    let (head, rest) = segments.split_first().expect("non-empty path");
    match node {
        Value::Array(items) => {
            if let Ok(i) = head.parse::<usize>() {
                let len = items.len();
                let item = items
                    .get_mut(i)
                    .ok_or_else(|| CliError::Config(format!("index {i} out of range (array has {len})")))?;
                return descend(item, rest, value);
            }
            if items.is_empty() {
                return Err(CliError::Config(format!("cannot set {head:?} on an empty array")));
            }
            for item in items {
                set_path(item, segments, value)?;
            }
            Ok(())
        }
        Value::Object(map) => {
            if rest.is_empty() {
                map.insert(head.to_string(), value.clone());
                return Ok(());
            }
            let child = map.entry(head.to_string()).or_insert_with(|| Value::Object(Default::default()));
            set_path(child, rest, value)
        }
        other => Err(CliError::Config(format!("cannot set {head:?} inside {other}"))),
    }
}

fn descend(node: &mut Value, rest: &[&str], value: &Value) -> Result<(), CliError> {
    if rest.is_empty() {
        *node = value.clone();
        Ok(())
    } else {
        set_path(node, rest, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_paths_and_broadcast() {
        let mut doc = json!({"risk": {"beta": 1.0}, "agents": [{"bonus": {}}, {"bonus": {"c": 2.0}}]});
        apply_override(&mut doc, "risk.beta=-0.5").unwrap();
        apply_override(&mut doc, "agents.bonus.c=4.0").unwrap();
        apply_override(&mut doc, "agents.1.id=second").unwrap();
        assert_eq!(doc["risk"]["beta"], json!(-0.5));
        assert_eq!(doc["agents"][0]["bonus"]["c"], json!(4.0));
        assert_eq!(doc["agents"][1]["bonus"]["c"], json!(4.0));
        assert_eq!(doc["agents"][1]["id"], json!("second"));
        apply_override(&mut doc, "seeds=[1,2,3]").unwrap();
        assert_eq!(doc["seeds"], json!([1, 2, 3]));
    }

    #[test]
    fn malformed_overrides() {
        let mut doc = json!({"a": 1});
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "a..b=1").is_err());
        assert!(apply_override(&mut doc, "a.b=1").is_err());
        let mut doc = json!({"xs": [1]});
        assert!(apply_override(&mut doc, "xs.3=1").is_err());
    }
}
