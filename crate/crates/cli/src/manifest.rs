use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Record of one CLI run. Written after every other output file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl Manifest {
    pub fn new(
        command: &str,
        parameters: Value,
        seed: Option<u64>,
        outputs: Vec<PathBuf>,
        started: Instant,
    ) -> Self {
        Manifest {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            duration_seconds: started.elapsed().as_secs_f64(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
