//! Plain key=value config files. Every key has a command-line flag twin;
//! flags override file values, file values override defaults.

use retain_core::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Format(format!(
                        "{}:{}: expected 'key = value'",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                entries.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { entries })
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Format(format!("config key '{}': bad value '{}'", key, raw))
            }),
        }
    }

    /// flag > file > default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(flag.or(self.parse(key)?).unwrap_or(default))
    }

    /// Like `resolve` but without a default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(flag.or(self.parse(key)?))
    }

    /// Boolean flags: the flag can only turn the option on; the file twin
    /// takes true/false.
    pub fn resolve_flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.parse::<bool>(key)?.unwrap_or(false))
    }
}

/// Writes the fully resolved settings next to the outputs so a run can be
/// reproduced from its artifacts alone.
pub fn echo_config(out_dir: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (key, value) in entries {
        text.push_str(key);
        text.push_str(" = ");
        text.push_str(value);
        text.push('\n');
    }
    std::fs::write(out_dir.join("config.txt"), text)?;
    Ok(())
}
