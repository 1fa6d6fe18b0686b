//! Session file: artifact paths and hashes, configuration, the gender axis
//! and cached sweeps. Vectors stay in the artifact files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use debias_core::geometry::{DebiasConfig, GenderDirection};
use debias_core::tuner::{PresetTable, SweepPoint};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::WorkbenchConfig;
use crate::error::{Result, WorkbenchError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl ArtifactRef {
    pub fn hash_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(WorkbenchError::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifacts {
    pub embeddings: ArtifactRef,
    pub pairs: ArtifactRef,
    pub labels: ArtifactRef,
}

impl Artifacts {
    pub fn hash(embeddings: &Path, pairs: &Path, labels: &Path) -> Result<Self> {
        Ok(Self {
            embeddings: ArtifactRef::hash_file(embeddings)?,
            pairs: ArtifactRef::hash_file(pairs)?,
            labels: ArtifactRef::hash_file(labels)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SweepKey {
    pub category: String,
    pub grid_hash: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedSweep {
    pub key: SweepKey,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub artifacts: Artifacts,
    pub config: WorkbenchConfig,
    pub debias: DebiasConfig,
    pub direction: GenderDirection,
    pub sweeps: Vec<CachedSweep>,
    pub presets: Option<PresetTable>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("plain data serializes"))
}

/// Everything except the grid that changes what a sweep computes.
#[derive(Serialize)]
struct SweepInputs<'a> {
    embeddings: &'a str,
    pairs: &'a str,
    labels: &'a str,
    hnsw: &'a crate::config::HnswConfig,
    biased_words: usize,
    anchors: crate::config::Anchors,
    vocabulary_pattern: &'a Option<String>,
    normalize: bool,
    renormalize_after: bool,
    apply_equalize: bool,
}

impl Session {
    pub fn new(
        artifacts: Artifacts,
        config: WorkbenchConfig,
        debias: DebiasConfig,
        direction: GenderDirection,
    ) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            schema_version: SCHEMA_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            created_at,
            artifacts,
            config,
            debias,
            direction,
            sweeps: Vec::new(),
            presets: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(WorkbenchError::io(path))?;
        let session: Self =
            serde_json::from_str(&text).map_err(WorkbenchError::json(path.display().to_string()))?;
        if session.schema_version != SCHEMA_VERSION {
            return Err(WorkbenchError::Invalid(format!(
                "session schema version {} is not supported (expected {SCHEMA_VERSION})",
                session.schema_version
            )));
        }
        Ok(session)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(WorkbenchError::json("session"))?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(WorkbenchError::io(&tmp))?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .and_then(|_| f.sync_all())
            .map_err(WorkbenchError::io(&tmp))?;
        fs::rename(&tmp, path).map_err(WorkbenchError::io(path))
    }

    pub fn config_hash(&self) -> String {
        let c = &self.config;
        json_hash(&SweepInputs {
            embeddings: &self.artifacts.embeddings.sha256,
            pairs: &self.artifacts.pairs.sha256,
            labels: &self.artifacts.labels.sha256,
            hnsw: &c.hnsw,
            biased_words: c.biased_words,
            anchors: c.anchors,
            vocabulary_pattern: &c.vocabulary_pattern,
            normalize: c.normalize,
            renormalize_after: c.renormalize_after,
            apply_equalize: c.apply_equalize,
        })
    }

    pub fn sweep_key(&self, category: &str) -> SweepKey {
        SweepKey {
            category: category.to_string(),
            grid_hash: json_hash(&self.config.grid),
            config_hash: self.config_hash(),
        }
    }

    pub fn cached_sweep(&self, key: &SweepKey) -> Option<&[SweepPoint]> {
        self.sweeps
            .iter()
            .find(|s| &s.key == key)
            .map(|s| s.points.as_slice())
    }

    pub fn store_sweep(&mut self, key: SweepKey, points: Vec<SweepPoint>) {
        self.sweeps.retain(|s| s.key.category != key.category);
        self.sweeps.push(CachedSweep { key, points });
        self.sweeps.sort_by(|a, b| a.key.category.cmp(&b.key.category));
        self.presets = None;
    }

    /// Drops every cached result that no longer matches the current inputs.
    pub fn invalidate_stale(&mut self) {
        let config_hash = self.config_hash();
        let grid_hash = json_hash(&self.config.grid);
        let before = self.sweeps.len();
        self.sweeps
            .retain(|s| s.key.config_hash == config_hash && s.key.grid_hash == grid_hash);
        if self.sweeps.len() != before {
            self.presets = None;
        }
    }
}
