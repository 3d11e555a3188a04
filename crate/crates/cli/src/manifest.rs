//! Run manifests written beside every command's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use serialsdf::io::write_atomic;
use serialsdf::Result;

use crate::config::RunConfig;

/// Version of the CSV column layouts written by this tool.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Versions {
    pub serialsdf: &'static str,
    pub csv_schema: u32,
    pub decoder_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            serialsdf: env!("CARGO_PKG_VERSION"),
            csv_schema: CSV_SCHEMA_VERSION,
            decoder_format: serialsdf::field::PARAMS_VERSION,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    /// Command-specific settings beyond the run config.
    pub options: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub versions: Versions,
    /// Seconds since the Unix epoch. Everything else in the manifest is a
    /// function of the inputs.
    pub timestamp: u64,
}

impl Manifest {
    pub fn new(command: &'static str, config: &RunConfig, options: Value) -> Self {
        Manifest {
            command,
            seed: config.seed,
            config: config.clone(),
            options,
            inputs: Vec::new(),
            outputs: Vec::new(),
            versions: Versions::default(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, self).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        Ok(path)
    }
}
