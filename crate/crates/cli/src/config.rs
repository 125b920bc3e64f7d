//! Optional JSON run configuration. Every file carries a `schema` field
//! naming the subcommand and format version, e.g. `"clo/1"`.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Unreadable(format!("cannot read {}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>, schema: &str) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = read_input(path)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let found = value.get("schema").and_then(|s| s.as_str()).map(str::to_string);
    match found {
        Some(s) if s == schema => {}
        Some(s) => {
            return Err(CliError::Validation(format!(
                "{}: schema `{s}` does not match `{schema}`",
                path.display()
            )))
        }
        None => return Err(CliError::Validation(format!("{}: missing `schema` field", path.display()))),
    }
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema");
    }
    serde_json::from_value(value).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
