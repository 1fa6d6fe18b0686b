//! Workbench configuration file (JSON). Every field is optional.

use std::fs;
use std::path::Path;

use debias_core::ann::{HnswParams, DEFAULT_EF_CONSTRUCTION, DEFAULT_EF_SEARCH, DEFAULT_M, DEFAULT_SEED};
use debias_core::corpus::DEFAULT_VOCAB_PATTERN;
use debias_core::evaluate::DEFAULT_BIASED_WORDS;
use debias_core::pipeline::PipelineOptions;
use debias_core::tuner::{Objective, ThetaGrid, Weights};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnswConfig {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
            ef_search: DEFAULT_EF_SEARCH,
            seed: DEFAULT_SEED,
        }
    }
}

impl HnswConfig {
    pub fn params(&self) -> HnswParams {
        HnswParams::new(self.m, self.ef_construction)
    }
}

/// How the male and female bias anchors are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchors {
    /// Normalized centroids of the equalized male and female pair words.
    #[default]
    PairCentroids,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub grid: ThetaGrid,
    pub hnsw: HnswConfig,
    pub biased_words: usize,
    pub anchors: Anchors,
    pub objective: Objective,
    pub weights: Weights,
    /// Full-match filter applied to the vocabulary; `null` keeps every word.
    pub vocabulary_pattern: Option<String>,
    pub normalize: bool,
    pub renormalize_after: bool,
    pub apply_equalize: bool,
    pub kmeans_seed: u64,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        Self {
            grid: ThetaGrid::default(),
            hnsw: HnswConfig::default(),
            biased_words: DEFAULT_BIASED_WORDS,
            anchors: Anchors::default(),
            objective: Objective::default(),
            weights: Weights::default(),
            vocabulary_pattern: Some(DEFAULT_VOCAB_PATTERN.to_string()),
            normalize: true,
            renormalize_after: false,
            apply_equalize: true,
            kmeans_seed: 0,
        }
    }
}

impl WorkbenchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(WorkbenchError::io(path))?;
        let config: Self =
            serde_json::from_str(&text).map_err(WorkbenchError::json(path.display().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hnsw
            .params()
            .validate()
            .map_err(|e| WorkbenchError::Invalid(e.to_string()))?;
        if self.hnsw.ef_search == 0 {
            return Err(WorkbenchError::Invalid("hnsw.ef_search must be at least 1".into()));
        }
        if self.biased_words == 0 {
            return Err(WorkbenchError::Invalid("biased_words must be at least 1".into()));
        }
        if !(self.weights.performance > 0.0 && self.weights.bias > 0.0) {
            return Err(WorkbenchError::Invalid("weights must both be positive".into()));
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            ef_search: self.hnsw.ef_search,
            biased_words: self.biased_words,
        }
    }
}
