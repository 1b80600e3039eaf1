//! Provenance sidecars: every artifact-writing command records its resolved
//! configuration, the seed, and a hash of both next to the output so a run
//! can be reproduced exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn config_hash(config: &impl Serialize) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a C,
    config_sha256: String,
}

pub fn provenance_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    artifact.with_file_name(name)
}

/// Write `<artifact>.provenance.json` describing how the artifact was made.
pub fn write_provenance(
    artifact: &Path,
    command: &str,
    seed: u64,
    config: &impl Serialize,
) -> ddmaps::Result<()> {
    let prov = Provenance {
        command,
        seed,
        config,
        config_sha256: config_hash(config),
    };
    let w = BufWriter::new(File::create(provenance_path(artifact))?);
    serde_json::to_writer_pretty(w, &prov)?;
    Ok(())
}
