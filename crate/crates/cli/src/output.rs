use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use mdl_ensemble::VERSION;

/// Identifies the run behind an artifact. Thread count and output directory
/// are left out so that artifacts compare byte for byte across both.
pub struct Provenance {
    pub command: &'static str,
    pub seed: u64,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &'static str, seed: u64, config: &impl Serialize) -> anyhow::Result<Provenance> {
        Ok(Provenance {
            command,
            seed,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": "mdl-ensemble",
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
        })
    }

    /// Comment lines for CSV and text artifacts.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("mdl-ensemble {VERSION} {}", self.command),
            format!("seed: {}", self.seed),
            format!("config: {}", self.config),
        ]
    }

    /// `value` (an object) with a `provenance` member added.
    pub fn attach(&self, mut value: Value) -> Value {
        if let Value::Object(map) = &mut value {
            map.insert("provenance".into(), self.to_json());
        }
        value
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}
