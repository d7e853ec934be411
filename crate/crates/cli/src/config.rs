//! Config files, input hashing and the resolved run config.

use std::io::Read;
use std::path::Path;

use anyhow::Context;
use cellplan::instance::{read_instance, GeneratorConfig};
use cellplan::oracle::OracleLimits;
use cellplan::{ProblemInstance, SolverParams};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::exit::Failure;

pub const RUN_CONFIG_VERSION: u32 = 1;

/// Reads `path` as TOML when it ends in `.toml`, JSON otherwise.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::bad_input)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::bad_input)
    } else {
        serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::bad_input)
    }
}

/// Raw bytes of a file or, for `-`, of stdin.
pub fn read_input(source: &str) -> Result<Vec<u8>, Failure> {
    let mut bytes = Vec::new();
    if source == "-" {
        std::io::stdin()
            .read_to_end(&mut bytes)
            .context("reading stdin")
            .map_err(Failure::bad_input)?;
    } else {
        bytes = std::fs::read(source)
            .with_context(|| format!("reading {source}"))
            .map_err(Failure::bad_input)?;
    }
    Ok(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub source: String,
    pub sha256: String,
}

pub fn load_instance(source: &str) -> Result<(ProblemInstance, InputRecord), Failure> {
    let bytes = read_input(source)?;
    let record = InputRecord {
        source: source.to_string(),
        sha256: sha256_hex(&bytes),
    };
    let inst = read_instance(bytes.as_slice())?;
    Ok((inst, record))
}

/// Everything needed to repeat a command.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleLimits>,
}

impl RunConfig {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self {
            version: RUN_CONFIG_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            threads: rayon::current_num_threads(),
            inputs: Vec::new(),
            generator: None,
            solver: None,
            oracle: None,
        }
    }
}
