//! Run manifests: resolved configuration, versions, seed and content hashes.

use cavcool::experiments::{ExperimentConfig, ExperimentOutput};
use cavcool::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Default values of the named config sections, rendered as TOML.
pub fn defaults_help(sections: &[&str]) -> String {
    let value = toml::Value::try_from(ExperimentConfig::default()).expect("defaults serialize");
    let mut out = String::from("Defaults (override in the matching section of --config):\n");
    for name in sections {
        let mut table = toml::map::Map::new();
        if let Some(section) = value.get(*name) {
            table.insert((*name).to_string(), section.clone());
        }
        out.push('\n');
        out.push_str(&toml::to_string(&table).unwrap_or_default());
    }
    out
}

/// The resolved configuration stored in an earlier manifest.
pub fn config_from_manifest(text: &str) -> Result<String, Error> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    v.get("config")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Parse("manifest has no config entry".into()))
}

/// Writes the tables and extra files, then the manifest describing them.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    output: &ExperimentOutput,
    inputs: &[&Path],
    wall_time: f64,
) -> Result<(), Error> {
    let mut files = Vec::new();
    let mut emit = |name: &str, content: &[u8]| -> Result<(), Error> {
        std::fs::write(dir.join(name), content)?;
        files.push(json!({ "file": name, "sha256": sha256_hex(content) }));
        Ok(())
    };
    for (name, table) in &output.tables {
        emit(name, table.to_csv().as_bytes())?;
    }
    for (name, content) in &output.files {
        emit(name, content.as_bytes())?;
    }
    let summary_text = serde_json::to_string_pretty(&output.summary).unwrap_or_default() + "\n";
    emit(&format!("{}_summary.json", output.name), summary_text.as_bytes())?;

    let mut input_hashes = Vec::new();
    for path in inputs {
        let bytes = std::fs::read(path)?;
        input_hashes.push(json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }));
    }
    let seed = match output.name {
        "cool" => Some(config.cool.seed),
        "forcescan" => Some(config.forcescan.seed),
        _ => None,
    };
    let manifest = json!({
        "command": output.name,
        "version": env!("CARGO_PKG_VERSION"),
        "arch": std::env::consts::ARCH,
        "seed": seed,
        "config": config.to_toml(),
        "inputs": input_hashes,
        "outputs": files,
        "passed": output.passed,
        "wall_time_s": wall_time,
    });
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn help_lists_section_defaults() {
        let h = defaults_help(&["cool"]);
        assert!(h.contains("[cool]"));
        assert!(h.contains("trajectories = 10000"));
    }

    #[test]
    fn manifest_without_config_is_rejected() {
        assert!(config_from_manifest("{}").is_err());
        assert_eq!(config_from_manifest(r#"{"config":"a = 1"}"#).unwrap(), "a = 1");
    }
}
