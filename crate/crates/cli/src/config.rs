//! `key = value` config files with optional `[command]` sections.
//!
//! Top-level keys apply to every command; keys under `[name]` apply only when
//! running `name`. Command-line flags override both.

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Keys accepted in a config file, spelled as their long flags.
pub const KEYS: &[&str] = &[
    "j", "gamma1", "gamma2", "dt", "t-max", "shots", "seed", "n", "grid", "gmin", "gmax", "out",
    "band", "reps", "times",
];

/// Commands that may head a section.
pub const COMMANDS: &[&str] = &[
    "analytic",
    "numeric",
    "compare",
    "phasemap",
    "fpt-sample",
    "fpt-estimate",
    "variance-scan",
    "critical-x",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// `None` for top-level entries.
    pub section: Option<String>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses config text; `path` is only used in error messages.
pub fn parse(text: &str, path: &Path) -> Result<Vec<Entry>, CliError> {
    let err = |line: usize, message: String| CliError::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut section = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("malformed section header `{content}`")))?
                .trim();
            if !COMMANDS.contains(&name) {
                return Err(err(line, format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = normalise(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        let key = if key == "grid" { "n".to_string() } else { key };
        if let Some(prev) = entries
            .iter()
            .find(|e| e.key == key && e.section == section)
        {
            return Err(err(
                line,
                format!("key `{key}` already set on line {}", prev.line),
            ));
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
            section: section.clone(),
        });
    }
    Ok(entries)
}

pub fn load(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: PathBuf::from(path),
        source,
    })?;
    parse(&text, path)
}

/// Entries relevant to `command`, section entries taking precedence over
/// top-level ones.
pub fn for_command<'a>(entries: &'a [Entry], command: &str) -> Vec<&'a Entry> {
    let mut out: Vec<&Entry> = entries
        .iter()
        .filter(|e| e.section.as_deref() == Some(command))
        .collect();
    for e in entries.iter().filter(|e| e.section.is_none()) {
        if !out.iter().any(|o| o.key == e.key) {
            out.push(e);
        }
    }
    out
}
