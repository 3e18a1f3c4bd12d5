//! Self-describing report files.
//!
//! Every JSON report embeds the resolved config, the tool version and the
//! config hash; keys are sorted (serde_json's default map is ordered).
//! CSV files follow RFC 4180 with a mandatory header row and carry the
//! config hash as a column so each row is traceable to its run.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use flatlab::error::{Error, Result};

pub const TOOL_NAME: &str = "flatlab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the canonical (sorted-key) JSON encoding of the config.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let value = serde_json::to_value(config)
        .map_err(|e| Error::InvalidParameter(format!("encoding config: {e}")))?;
    let canon = value.to_string();
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

/// Wrap a payload into the standard report envelope and render it with
/// sorted keys.
pub fn render_report<C: Serialize, P: Serialize>(config: &C, payload: &P) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("config".into(), to_value(config)?);
    map.insert("config_hash".into(), Value::from(config_hash(config)?));
    map.insert("report".into(), to_value(payload)?);
    map.insert("tool".into(), Value::from(TOOL_NAME));
    map.insert("version".into(), Value::from(TOOL_VERSION));
    let mut text = serde_json::to_string_pretty(&Value::Object(map))
        .map_err(|e| Error::InvalidParameter(format!("encoding report: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidParameter(format!("encoding report: {e}")))
}

pub fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidParameter(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Error::InvalidParameter(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

/// RFC 4180 CSV with header; a `config_hash` column is appended to every
/// row.
pub fn render_csv(header: &str, rows: &[String], hash: &str) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push_str(",config_hash\r\n");
    for row in rows {
        out.push_str(row);
        out.push(',');
        out.push_str(hash);
        out.push_str("\r\n");
    }
    out
}
