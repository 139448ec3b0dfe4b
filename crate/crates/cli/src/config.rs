//! Optional JSON config file. Keys mirror long flag names (either `bz-max`
//! or `bz_max`); a flag given on the command line always wins.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Default)]
pub struct Config {
    values: Map<String, Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(values)) => Ok(Self { values }),
            Ok(_) => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
            Err(e) => Err(CliError::Parse(format!("{}: {e}", path.display()))),
        }
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        self.values.get(key).or_else(|| self.values.get(&key.replace('-', "_")))
    }

    /// Flag value, else config value, else `None`.
    pub fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.lookup(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn get<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// Boolean switch: set on the command line or `true` in the config.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.opt::<bool>(None, key)?.unwrap_or(false))
    }

    /// Required value; missing is a usage error.
    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        self.opt(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}")))
    }
}
