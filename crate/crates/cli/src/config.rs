//! Settings resolution: command-line flags override the `[command]` table of
//! an optional TOML file, which overrides built-in defaults. The resolved
//! settings are written back as a TOML snapshot that reproduces the run.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Loads the table for `command` from a TOML file, or an empty table.
pub fn file_table(path: Option<&Path>, command: &str) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Some(section) = doc.get(command) else {
        return Ok(Map::new());
    };
    match serde_json::to_value(section) {
        Ok(Value::Object(map)) => Ok(map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect()),
        _ => Err(CliError::Usage(format!("[{command}] in {} is not a table", path.display()))),
    }
}

/// `defaults` ← `file` ← `flags`, then deserialized as `S`.
pub fn resolve<S, F>(defaults: &S, file: Map<String, Value>, flags: &F) -> Result<S, CliError>
where
    S: Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut merged = match serde_json::to_value(defaults) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("settings serialize to a table"),
    };
    for (k, v) in file {
        if !merged.contains_key(&k) {
            return Err(CliError::Usage(format!("unknown setting `{k}` in config file")));
        }
        merged.insert(k, v);
    }
    if let Ok(Value::Object(f)) = serde_json::to_value(flags) {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid setting: {e}")))
}

/// Snapshot path next to a primary output.
pub fn snapshot_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

/// Writes `[command]` followed by the resolved settings.
pub fn write_snapshot<S: Serialize>(output: &Path, command: &str, settings: &S) -> Result<(), CliError> {
    let mut doc = toml::Table::new();
    // TOML has no null; unset optional settings are simply omitted.
    let json = match serde_json::to_value(settings) {
        Ok(Value::Object(m)) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        Ok(other) => other,
        Err(e) => return Err(CliError::Data(format!("snapshot: {e}"))),
    };
    let value = toml::Value::try_from(json).map_err(|e| CliError::Data(format!("snapshot: {e}")))?;
    doc.insert(command.to_string(), value);
    let text = toml::to_string(&doc).map_err(|e| CliError::Data(format!("snapshot: {e}")))?;
    let path = snapshot_path(output);
    std::fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    struct S {
        count: usize,
        lr: f64,
        name: String,
    }

    #[derive(Serialize)]
    struct F {
        count: Option<usize>,
        lr: Option<f64>,
    }

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let defaults = S {
            count: 1,
            lr: 0.5,
            name: "a".into(),
        };
        let mut file = Map::new();
        file.insert("count".into(), Value::from(5));
        file.insert("name".into(), Value::from("b"));
        let flags = F {
            count: Some(9),
            lr: None,
        };
        let s: S = resolve(&defaults, file, &flags).unwrap();
        assert_eq!(
            s,
            S {
                count: 9,
                lr: 0.5,
                name: "b".into()
            }
        );
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let defaults = S {
            count: 1,
            lr: 0.5,
            name: "a".into(),
        };
        let mut file = Map::new();
        file.insert("cuont".into(), Value::from(5));
        assert!(resolve(&defaults, file, &F { count: None, lr: None }).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("data.bin");
        let s = S {
            count: 3,
            lr: 2e-4,
            name: "x".into(),
        };
        write_snapshot(&out, "gen-dataset", &s).unwrap();
        let table = file_table(Some(&snapshot_path(&out)), "gen-dataset").unwrap();
        let back: S = resolve(&S { count: 0, lr: 0.0, name: String::new() }, table, &F { count: None, lr: None }).unwrap();
        assert_eq!(back, s);
    }
}
