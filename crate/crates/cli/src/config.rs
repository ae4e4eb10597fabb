//! Optional JSON config files. Keys mirror the long flag names of the
//! subcommand (`{"sigma": 0.1, "patch": 8, "in": "y.pgm"}`); a flag given on
//! the command line always wins over the file.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::CliError;

/// Field-wise `self.or(file)`.
pub trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! impl_merge {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::config::Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}
pub(crate) use impl_merge;

/// Loads `path` as a JSON object, rejecting keys that are not flags of the
/// subcommand, and deserializes it into `T`.
pub fn load<T: DeserializeOwned>(path: &Path, allowed: &BTreeSet<String>) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid JSON in {}: {e}", path.display())))?;
    let map: Map<String, Value> = match value {
        Value::Object(m) => m,
        _ => {
            return Err(CliError::usage(format!(
                "{} must hold a JSON object",
                path.display()
            )))
        }
    };
    if let Some(bad) = map
        .keys()
        .find(|k| !allowed.contains(*k) || k.as_str() == "config")
    {
        return Err(CliError::usage(format!(
            "unknown key '{bad}' in config {}",
            path.display()
        )));
    }
    serde_json::from_value(Value::Object(map))
        .map_err(|e| CliError::usage(format!("bad value in config {}: {e}", path.display())))
}
