//! Optional TOML configuration. Each table mirrors one subcommand and uses
//! the same option names as the command line (`window`, `epochs`, ...);
//! flags given on the command line win.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

#[derive(Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Self { table })
    }

    /// The `[section]` table deserialized into `T`; empty when absent.
    pub fn section<T: DeserializeOwned + Default>(&self, section: &str) -> Result<T> {
        match self.table.get(section) {
            Some(value) => {
                let normalized = normalize_keys(value.clone());
                normalized
                    .try_into()
                    .with_context(|| format!("invalid [{section}] section in config"))
            }
            None => Ok(T::default()),
        }
    }
}

/// Accepts `kebab-case` keys as written on the command line.
fn normalize_keys(value: toml::Value) -> toml::Value {
    match value {
        toml::Value::Table(t) => toml::Value::Table(
            t.into_iter()
                .map(|(k, v)| (k.replace('-', "_"), normalize_keys(v)))
                .collect(),
        ),
        other => other,
    }
}

/// Fills every `None` field of `cli` from `file`.
macro_rules! merge {
    ($cli:expr, $file:expr; $($field:ident),* $(,)?) => {{
        let mut merged = $cli;
        let file = $file;
        $(
            if merged.$field.is_none() {
                merged.$field = file.$field;
            }
        )*
        merged
    }};
}
pub(crate) use merge;
