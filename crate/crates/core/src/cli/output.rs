use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One output file produced by a scenario, held in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// CSV table with a leading `# schema:` line.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        let mut text = format!("# schema: collshift.{kind}.v1\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            write!(self.text, "{v:e}").expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn into_artifact(self, name: &str) -> Artifact {
        Artifact { name: name.to_owned(), contents: self.text }
    }
}

pub fn json_artifact(name: &str, value: &impl Serialize) -> Artifact {
    let mut contents = serde_json::to_string_pretty(value).expect("serializable result bundle");
    contents.push('\n');
    Artifact { name: name.to_owned(), contents }
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub version: &'static str,
    pub scenario: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub outputs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(scenario: &'static str, config_bytes: &[u8], seed: u64, workers: usize, artifacts: &[Artifact]) -> Self {
        Self {
            schema: "collshift.manifest.v1",
            version: env!("CARGO_PKG_VERSION"),
            scenario,
            config_sha256: sha256_hex(config_bytes),
            seed,
            workers,
            outputs: artifacts
                .iter()
                .map(|a| ManifestEntry { file: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()) })
                .collect(),
        }
    }
}
