//! Newline-delimited JSON result store. Appends take an exclusive lock on the
//! file; queries skip lines that do not parse.

use std::fs::OpenOptions;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub fingerprint: String,
    pub timestamp: String,
    pub tool_version: String,
    pub config: Value,
    pub output: Value,
}

impl ResultRecord {
    pub fn new(config: Value, output: Value) -> Self {
        ResultRecord {
            fingerprint: fingerprint(&config),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            output,
        }
    }
}

/// SHA-256 of the compact JSON form (object keys sorted).
pub fn fingerprint(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn append(path: &Path, record: &ResultRecord) -> io::Result<()> {
    let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.lock()?;
    let written = file.write_all(line.as_bytes()).and_then(|_| file.flush());
    file.unlock()?;
    written
}

/// Matching records in file order. A missing store has no records.
pub fn query(path: &Path, fingerprint: Option<&str>) -> io::Result<Vec<ResultRecord>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResultRecord>(&line) {
            Ok(rec) if fingerprint.is_none_or(|f| f == rec.fingerprint) => out.push(rec),
            Ok(_) => {}
            Err(e) => log::warn!("{}: skipping corrupt line {}: {e}", path.display(), k + 1),
        }
    }
    Ok(out)
}
