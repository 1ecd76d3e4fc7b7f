use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct Versions {
    pub rxfuse: &'static str,
    pub features: Vec<&'static str>,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub versions: Versions,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, output_dir: &Path) -> RunManifest {
        let mut features = Vec::new();
        if cfg!(feature = "parallel") {
            features.push("parallel");
        }
        if cfg!(feature = "live") {
            features.push("live");
        }
        RunManifest {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            config: None,
            inputs: Vec::new(),
            output_dir: output_dir.to_path_buf(),
            seed: None,
            started_unix: now(),
            finished_unix: 0,
            versions: Versions { rxfuse: env!("CARGO_PKG_VERSION"), features },
        }
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.finished_unix = now();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(self.output_dir.join(MANIFEST_FILE), json + "\n")
    }
}
