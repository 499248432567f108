//! The `report.json` schema.

use std::collections::BTreeMap;

use loopsol::tolerances::Tolerances;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Written last, after every other artifact. Keys are emitted in field order;
/// maps are sorted. `wall_time_s` is the only field that varies between
/// identical runs.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub context: String,
    /// SHA-256 over the canonical config, the seed, the tolerance scale and any input files.
    pub inputs_digest: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub tolerances: Tolerances,
    pub residuals: BTreeMap<String, f64>,
    pub pass: BTreeMap<String, bool>,
    pub passed: bool,
    /// Set when the run stopped early or masked points; artifacts may be incomplete.
    pub partial: bool,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

pub fn inputs_digest(canonical: &str, seed: u64, scale: f64, inputs: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(scale.to_le_bytes());
    for bytes in inputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
