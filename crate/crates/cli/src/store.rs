//! Results store: one directory per run holding the effective config, the
//! manifest, and one CSV per experiment.

use anyhow::{anyhow, Context, Result};
use conelab_core::experiments::{ExperimentConfig, RunReport};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::PathBuf;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub name: String,
    pub csv: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp: String,
    pub seed: u64,
    pub code_version: String,
    /// Hash of the stored config snapshot, byte for byte.
    pub config_sha256: String,
    pub config_path: String,
    pub experiments: Vec<ExperimentEntry>,
    pub all_passed: bool,
    pub wall_time_seconds: f64,
}

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    /// Run ids present in the store, oldest first. A missing root is an
    /// empty store.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(ids),
            Err(err) => return Err(err).context("reading results directory"),
        };
        for entry in entries {
            let entry = entry?;
            if entry.path().join("manifest.json").is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn load_manifest(&self, run_id: &str) -> Result<RunManifest> {
        let path = self.run_dir(run_id).join("manifest.json");
        let bytes = fs::read(&path).map_err(|_| anyhow!("unknown run id: {run_id}"))?;
        serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_csv(&self, run_id: &str, csv_name: &str) -> Result<Vec<u8>> {
        let path = self.run_dir(run_id).join(csv_name);
        fs::read(&path).with_context(|| format!("reading {}", path.display()))
    }

    /// Writes config snapshot, CSVs, and manifest; returns the manifest.
    pub fn persist(
        &self,
        cfg: &ExperimentConfig,
        report: &RunReport,
        timestamp: chrono::DateTime<chrono::Utc>,
        wall_time_seconds: f64,
    ) -> Result<RunManifest> {
        let config_hash = cfg.sha256_hex();
        let stamp = timestamp.format("%Y%m%dT%H%M%SZ");
        let mut run_id = format!("{stamp}-{}", &config_hash[..8]);
        let mut attempt = 1u32;
        while self.run_dir(&run_id).exists() {
            attempt += 1;
            run_id = format!("{stamp}-{}-{attempt}", &config_hash[..8]);
        }
        let dir = self.run_dir(&run_id);
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))?;

        fs::write(dir.join("config.json"), cfg.to_json())?;

        let mut experiments = Vec::new();
        for table in &report.tables {
            let csv_name = format!("{}.csv", table.experiment.name());
            fs::write(dir.join(&csv_name), table.to_csv_bytes())?;
            experiments.push(ExperimentEntry {
                name: table.experiment.name().to_string(),
                csv: csv_name,
                passed: table.passed(),
            });
        }

        let manifest = RunManifest {
            run_id: run_id.clone(),
            timestamp: timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash,
            config_path: "config.json".to_string(),
            experiments,
            all_passed: report.all_passed(),
            wall_time_seconds,
        };
        let bytes = serde_json::to_vec_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}
