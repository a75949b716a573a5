use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::Value;

use infsup_lab_core::io::to_json_string;

pub fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: Option<&Path>, record: &Value) -> anyhow::Result<()> {
    match path {
        Some(p) => write(p, &to_json_string(record)),
        None => Ok(()),
    }
}
