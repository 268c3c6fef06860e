use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use qexp::search::{SearchOutcome, SearchStats, SCHEMA_VERSION};
use qexp::state::Srv;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub srv: Srv,
    pub hits: u64,
}

/// Summary of one search run; its `config` section alone reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub stats: SearchStats,
    pub solutions: u64,
    pub cancelled: bool,
    pub registry: Vec<RegistryEntry>,
    /// Toolbox at the end of the run (differs from the configured one when
    /// augmentation added composites).
    pub final_toolbox: String,
}

impl RunManifest {
    pub fn new(config: RunConfig, started_unix_ms: u64, outcome: &SearchOutcome, solutions: u64) -> Self {
        RunManifest {
            schema: SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed.unwrap_or_default(),
            config,
            started_unix_ms,
            finished_unix_ms: unix_ms(),
            stats: outcome.stats.clone(),
            solutions,
            cancelled: outcome.cancelled,
            registry: outcome
                .registry
                .iter()
                .map(|(srv, hits)| RegistryEntry { srv: srv.clone(), hits: *hits })
                .collect(),
            final_toolbox: outcome.toolbox.to_string(),
        }
    }
}

pub fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}
