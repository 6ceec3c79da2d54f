use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::FileDigest;
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSeed {
    pub label: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub version: String,
    pub master_seed: u64,
    pub derived_seeds: Vec<DerivedSeed>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub threads: usize,
    pub wall_time_s: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, LabError> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| LabError::Config(format!("{}: not a run manifest: {e}", path.display())))
    }
}
