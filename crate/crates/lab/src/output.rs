//! Output files and their digests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the output directory (absolute for inputs).
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String, LabError> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes tables and JSON documents into one directory and remembers what it
/// wrote.
pub struct Outputs {
    dir: PathBuf,
    format: Format,
    files: Vec<FileDigest>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Outputs {
    pub fn new(dir: &Path, format: Format) -> Result<Self, LabError> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: String) -> Result<(), LabError> {
        let sha256 = sha256_file(&self.dir.join(&name))?;
        self.files.push(FileDigest { path: name, sha256 });
        Ok(())
    }

    /// A table as `name.csv` or `name.json` depending on the format.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<Value>]) -> Result<(), LabError> {
        let file = match self.format {
            Format::Csv => {
                let file = format!("{name}.csv");
                let mut w = csv::Writer::from_path(self.dir.join(&file))?;
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r.iter().map(cell))?;
                }
                w.flush()?;
                file
            }
            Format::Json => {
                let file = format!("{name}.json");
                let objects: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(header.iter().map(|h| h.to_string()).zip(r.iter().cloned()).collect()))
                    .collect();
                fs::write(self.dir.join(&file), serde_json::to_vec_pretty(&objects)?)?;
                file
            }
        };
        self.record(file)
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), LabError> {
        let file = format!("{name}.json");
        fs::write(self.dir.join(&file), serde_json::to_vec_pretty(value)?)?;
        self.record(file)
    }

    pub fn into_files(self) -> Vec<FileDigest> {
        self.files
    }
}
