//! Index snapshots.
//!
//! A snapshot does not hold buckets. It records the seed, the configuration,
//! the plan and a fingerprint of the dataset; loading rebuilds the index,
//! which is deterministic in those inputs.
//!
//! Layout: `b"NNWFN1"`, one version byte, a `u32` little-endian payload
//! length, then the JSON payload.

use std::path::{Path, PathBuf};

use nnwfn_core::reduction::{BuildOptions, NnwfnIndex, ProblemConfig, ReductionPlan};
use nnwfn_core::Index;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Dataset, Format};
use crate::error::CliError;

pub const MAGIC: &[u8; 6] = b"NNWFN1";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub format: Format,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSnapshot {
    pub format_version: u8,
    pub seed: u64,
    pub config: ProblemConfig,
    pub plan: ReductionPlan,
    pub dataset: DatasetRef,
    pub expansion_budget: u64,
    pub combo_budget: u64,
}

impl IndexSnapshot {
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { expansion_budget: self.expansion_budget, combo_budget: self.combo_budget }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CliError> {
        let payload = serde_json::to_vec(self)?;
        let mut out = Vec::with_capacity(MAGIC.len() + 5 + payload.len());
        out.extend_from_slice(MAGIC);
        out.push(self.format_version);
        out.extend((payload.len() as u32).to_le_bytes());
        out.extend(payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < MAGIC.len() + 5 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CliError::BadMagic);
        }
        let version = bytes[MAGIC.len()];
        if version != FORMAT_VERSION {
            return Err(CliError::UnsupportedVersion(version));
        }
        let len_at = MAGIC.len() + 1;
        let len = u32::from_le_bytes(bytes[len_at..len_at + 4].try_into().expect("4 bytes")) as usize;
        let payload = bytes.get(len_at + 4..len_at + 4 + len).ok_or(CliError::Truncated)?;
        let snapshot: Self = serde_json::from_slice(payload)?;
        if snapshot.format_version != version {
            return Err(CliError::UnsupportedVersion(snapshot.format_version));
        }
        Ok(snapshot)
    }
}

pub fn save_snapshot(path: &Path, snapshot: &IndexSnapshot) -> Result<(), CliError> {
    std::fs::write(path, snapshot.encode()?).map_err(|e| CliError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<IndexSnapshot, CliError> {
    IndexSnapshot::decode(&std::fs::read(path).map_err(|e| CliError::io(path, e))?)
}

/// A snapshot with its dataset and the rebuilt index.
pub struct Loaded {
    pub snapshot: IndexSnapshot,
    pub dataset: Dataset,
    pub index: Index,
}

/// Reads a snapshot, checks the dataset fingerprint and rebuilds the index.
///
/// `dataset_override` replaces the recorded dataset path.
pub fn load_index(path: &Path, dataset_override: Option<&Path>) -> Result<Loaded, CliError> {
    let snapshot = read_snapshot(path)?;
    let data_path = dataset_override.unwrap_or(&snapshot.dataset.path);
    let dataset = load_dataset(data_path, snapshot.dataset.format)?;
    let fingerprint = dataset.fingerprint();
    if fingerprint != snapshot.dataset.fingerprint {
        return Err(CliError::StaleSnapshot { expected: snapshot.dataset.fingerprint.clone(), found: fingerprint });
    }
    let index = NnwfnIndex::build(dataset.points(), &snapshot.config, &snapshot.plan, snapshot.seed, &snapshot.build_options())?;
    Ok(Loaded { snapshot, dataset, index })
}
