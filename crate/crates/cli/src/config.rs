//! `--config` file: TOML, unknown keys rejected, `${VAR}` expanded in
//! string values, relative paths resolved against the file's directory.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use menter_core::{ErcConfig, SolverOptions};
use menter_llm::BackendConfig;
use regex::Regex;
use serde::Deserialize;
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub backend: BackendConfig,
    /// Think-tank store (JSON lines).
    pub ctt: Option<PathBuf>,
    /// Document index written by `ingest`.
    pub index: Option<PathBuf>,
    pub erc: ErcConfig,
    pub solver: SolverOptions,
    /// Pause for review at checkpoints during `run`.
    pub interactive: bool,
}

fn var_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

fn expand(s: &str, at: &str) -> Result<String, String> {
    let mut missing = None;
    let out = var_re().replace_all(s, |c: &regex::Captures<'_>| match std::env::var(&c[1]) {
        Ok(v) => v,
        Err(_) => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(var) => Err(format!("{at}: environment variable `{var}` is not set")),
        None => Ok(out.into_owned()),
    }
}

fn expand_all(v: &mut Value, at: &str) -> Result<(), String> {
    match v {
        Value::String(s) => *s = expand(s, at)?,
        Value::Array(items) => {
            for (i, item) in items.iter_mut().enumerate() {
                expand_all(item, &format!("{at}[{i}]"))?;
            }
        }
        Value::Table(t) => {
            for (k, item) in t.iter_mut() {
                let key = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                expand_all(item, &key)?;
            }
        }
        _ => {}
    }
    Ok(())
}

impl CliConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, String> {
        let mut doc: Value = text.parse::<toml::Table>().map(Value::Table).map_err(|e| e.to_string())?;
        expand_all(&mut doc, "")?;
        let mut cfg = CliConfig::deserialize(doc).map_err(|e| e.to_string())?;
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        };
        resolve(&mut cfg.backend.script);
        resolve(&mut cfg.ctt);
        resolve(&mut cfg.index);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::read_input(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}
