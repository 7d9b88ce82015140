//! Run reports: everything needed to reproduce a solve (instance hash,
//! config, seed) plus the result and per-generation history.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::driver::GenerationStats;
use crate::ga::GaConfig;

/// A complete record of one `solve` run.
///
/// `instance_sha256` binds the report to the exact input bytes; together
/// with the echoed config and master seed it reproduces the run exactly.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub instance_path: String,
    pub instance_sha256: String,
    /// `"exact"` or `"ga"`.
    pub algorithm: String,
    /// Full GA configuration; absent for exact runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ga_config: Option<GaConfig>,
    /// Enumeration cap; absent for GA runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_cap: Option<usize>,
    pub best_cost: f64,
    /// Covered vertices, 1-based.
    pub best_vertices: Vec<usize>,
    pub best_bitstring: String,
    pub generations_run: usize,
    pub wall_time_ms: f64,
    pub worker_count: usize,
    pub master_seed: u64,
    pub history: Vec<GenerationStats>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat history export: `generation,best_cost,mean_cost,frozen_count,elapsed_ms`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_cost,mean_cost,frozen_count,elapsed_ms\n");
        for row in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                row.generation, row.best_cost, row.mean_cost, row.frozen_count, row.elapsed_ms
            ));
        }
        out
    }
}

/// Hex SHA-256 of the given bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
