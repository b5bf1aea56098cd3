//! Flat key-value run configuration: file values fill in what the command
//! line leaves unset, flags always win.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key=value, got '{line}'", lineno + 1);
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(x) => Ok(Some(x)),
                Err(e) => bail!("config key '{key}': cannot parse '{v}': {e}"),
            },
        }
    }
}

/// Flag value if given, else config-file value, else the default.
pub fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(file.get(key)?).unwrap_or(default))
}

pub fn resolve_opt<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(file.get(key)?))
}
