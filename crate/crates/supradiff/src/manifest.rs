use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command invocation. `args` plus the resolved `config` are
/// enough to rerun it with `supradiff replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, PathBuf>,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub args: Vec<String>,
    pub duration_seconds: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        formats::read_json(path)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(MANIFEST_FILE);
        formats::write_text(&path, &formats::to_json(self))?;
        Ok(path)
    }
}
