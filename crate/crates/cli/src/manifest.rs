use std::collections::BTreeMap;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance of a run. Kept apart from the report body so that identical
/// inputs and seed give byte-identical bodies.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub problem_sha256: String,
    /// Hashes of other input files keyed by role (`data`, `agent`, ...).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(problem_bytes: &[u8], seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            problem_sha256: sha256_hex(problem_bytes),
            inputs: BTreeMap::new(),
            command_line: std::env::args().collect(),
            seed,
            started_at: now(),
            finished_at: None,
        }
    }

    pub fn add_input(&mut self, role: impl Into<String>, bytes: &[u8]) {
        self.inputs.insert(role.into(), sha256_hex(bytes));
    }

    pub fn finish(mut self) -> Self {
        self.finished_at = Some(now());
        self
    }
}

/// What every JSON report looks like on disk or stdout.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    pub report: &'a T,
}
