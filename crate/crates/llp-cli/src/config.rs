//! Flat key-value run configuration.
//!
//! A config file holds one `key = value` pair per line (`#` comments
//! allowed); keys match the long CLI flag names. Flags override file
//! values. Every command writes its fully resolved configuration into the
//! output directory so a run can be replayed bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use llp_mcm::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<ConfigMap> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Config(format!(
                        "{}:{}: expected `key = value`, got `{raw}`",
                        path.display(),
                        lineno + 1
                    )));
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigMap { values })
    }

    /// Flag value if given, else config-file value, else default.
    pub fn resolve<T: Clone + std::fmt::Display + std::str::FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => match self.values.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|_| Error::Config(format!("config key `{key}`: bad value `{raw}`")))?,
                None => default,
            },
        };
        self.values.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Same as [`resolve`](Self::resolve) but the value may be absent.
    pub fn resolve_opt<T: Clone + std::fmt::Display + std::str::FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.values.get(key) {
                Some(raw) => Some(raw.parse().map_err(|_| {
                    Error::Config(format!("config key `{key}`: bad value `{raw}`"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.values.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// The resolved configuration as stable `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.values {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("config.resolved"), self.render())?;
        Ok(())
    }
}

/// Comma-separated float list (used for means and lambda grids).
pub fn parse_floats(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("`{part}` is not a number")))
        })
        .collect()
}

/// Comma-separated integer list (used for sweep schedules).
pub fn parse_usizes(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("`{part}` is not an integer")))
        })
        .collect()
}
