//! Layered run configuration: defaults, then command-line flags, then the
//! matching section of a config file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Overlays `top` onto `base`, key by key. Nested objects merge; anything
/// else replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
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

/// Reads the `section` object of a JSON config file.
fn file_section(path: &Path, section: &str) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let root: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    match root {
        Value::Object(mut m) => Ok(m.remove(section).unwrap_or(Value::Object(Map::new()))),
        _ => Err(CliError::Usage(format!("config {} must be a JSON object", path.display()))),
    }
}

/// Resolves a command's configuration. `flags` serializes only the options
/// given on the command line.
pub fn resolve<C, F>(section: &str, flags: &F, file: Option<&Path>) -> Result<C, CliError>
where
    C: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut value = serde_json::to_value(C::default()).expect("serializable defaults");
    merge(&mut value, serde_json::to_value(flags).expect("serializable flags"));
    if let Some(path) = file {
        merge(&mut value, file_section(path, section)?);
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{section} config: {e}")))
}

/// Logs the resolved configuration and, when the command writes files,
/// stores it next to them as `<output>.config.json` so the file can be fed
/// back through `--config`.
pub fn emit<C: Serialize>(section: &str, config: &C, output: Option<&Path>) -> Result<(), CliError> {
    let mut root = Map::new();
    root.insert(section.to_string(), serde_json::to_value(config).expect("serializable config"));
    let text = serde_json::to_string(&root).expect("serializable config");
    log::info!("resolved config {text}");
    if let Some(out) = output {
        let path = sidecar(out);
        std::fs::write(&path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("config.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config.json");
        out.with_file_name(name)
    }
}

/// Unwraps a path every run of the command needs.
pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value.as_deref().ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default)]
    struct Demo {
        a: u32,
        b: String,
        c: Vec<f64>,
    }

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        b: Option<String>,
    }

    #[test]
    fn file_beats_flags_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"demo": {"b": "file"}, "other": {"a": 9}}"#).unwrap();
        let flags = Flags { a: Some(3), b: Some("flag".into()) };
        let got: Demo = resolve("demo", &flags, Some(&file)).unwrap();
        assert_eq!(got, Demo { a: 3, b: "file".into(), c: vec![] });
        let got: Demo = resolve("demo", &Flags { a: None, b: None }, None).unwrap();
        assert_eq!(got, Demo::default());
    }

    #[test]
    fn bad_types_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"demo": {"a": "x"}}"#).unwrap();
        let r: Result<Demo, _> = resolve("demo", &Flags { a: None, b: None }, Some(&file));
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("/x/tree.json")), PathBuf::from("/x/tree.json.config.json"));
    }
}
