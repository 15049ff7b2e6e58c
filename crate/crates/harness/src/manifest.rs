//! Run manifest: an append-only record of stages, their inputs and outcome.
//! Timestamps live here and nowhere else, so reports stay byte-stable.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{read_to_string, write_atomic, HarnessError, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Started,
    Completed,
    /// Outputs were already on disk.
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub status: StageStatus,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub unix_time: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub entries: Vec<StageEntry>,
    #[serde(skip)]
    path: Option<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Opens the manifest in `dir`, keeping earlier entries.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let mut m = if path.is_file() {
            serde_json::from_str(&read_to_string(&path)?)
                .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?
        } else {
            RunManifest::default()
        };
        m.path = Some(path);
        Ok(m)
    }

    pub fn record(&mut self, stage: &str, status: StageStatus, inputs: &[String], error: Option<String>) -> Result<()> {
        self.entries.push(StageEntry {
            stage: stage.to_string(),
            status,
            inputs: inputs.to_vec(),
            error,
            unix_time: now(),
        });
        if let Some(path) = &self.path {
            let text = serde_json::to_string_pretty(self).expect("manifest serializes");
            write_atomic(path, text + "\n")?;
        }
        Ok(())
    }

    /// Runs `f` as a named stage, recording start and outcome.
    pub fn stage<T>(&mut self, stage: &str, inputs: &[String], f: impl FnOnce() -> Result<T>) -> Result<T> {
        self.record(stage, StageStatus::Started, inputs, None)?;
        match f() {
            Ok(v) => {
                self.record(stage, StageStatus::Completed, inputs, None)?;
                Ok(v)
            }
            Err(e) => {
                self.record(stage, StageStatus::Failed, inputs, Some(e.to_string()))?;
                Err(e)
            }
        }
    }

    pub fn last_failure(&self) -> Option<&StageEntry> {
        self.entries.iter().rev().find(|e| e.status == StageStatus::Failed)
    }
}
