//! Artifact files with a provenance header.
//!
//! JSON-lines artifacts start with one header object; text artifacts start
//! with `# key value` comment lines.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub tool_version: String,
    pub config_hash: String,
    pub stage: String,
    pub records: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    snipmine: Header,
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::File {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_jsonl<T: Serialize>(path: &Path, stage: &str, config_hash: &str, records: &[T]) -> Result<()> {
    let header = HeaderLine {
        snipmine: Header {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            stage: stage.to_string(),
            records: records.len(),
        },
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Rejects a header from a different configuration unless `force` is set.
pub fn check_hash(path: &Path, found: &str, expected: &str, force: bool) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    if force {
        log::warn!("{}: config hash {found} differs from {expected}; continuing (forced)", path.display());
        return Ok(());
    }
    Err(Error::HashMismatch {
        path: path.to_path_buf(),
        expected: expected.to_string(),
        found: found.to_string(),
    })
}

pub fn read_text(path: &Path, producer: &'static str) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        });
    }
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a header-led JSON-lines artifact written by `producer`.
pub fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    producer: &'static str,
    config_hash: &str,
    force: bool,
) -> Result<Vec<T>> {
    let text = read_text(path, producer)?;
    let json_err = |line: usize| {
        let path = path.display().to_string();
        move |source| Error::Json {
            context: format!("{path} line {line}"),
            source,
        }
    };
    let mut lines = text.lines();
    let header: HeaderLine = serde_json::from_str(lines.next().unwrap_or("")).map_err(json_err(1))?;
    check_hash(path, &header.snipmine.config_hash, config_hash, force)?;
    let records = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(json_err(i + 2)))
        .collect::<Result<Vec<T>>>()?;
    if records.len() != header.snipmine.records {
        return Err(Error::Invalid(format!(
            "{}: header announces {} records, found {} (truncated file?)",
            path.display(),
            header.snipmine.records,
            records.len()
        )));
    }
    Ok(records)
}

/// `# key value` lines for text artifacts.
pub fn text_header(stage: &str, config_hash: &str) -> String {
    format!("# tool_version {TOOL_VERSION}\n# config_hash {config_hash}\n# stage {stage}\n")
}

/// The config hash from a text artifact's comment header.
pub fn text_header_hash(text: &str) -> Option<&str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_hash "))
        .map(str::trim)
}
