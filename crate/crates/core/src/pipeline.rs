//! Debias-and-evaluate pipeline shared by the tuner, the CLI and the service.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ann::{build_index, HnswIndex, HnswParams, DEFAULT_EF_SEARCH};
use crate::corpus::{CategoryLabels, EmbeddingSet, GenderPairSet};
use crate::evaluate::{
    bias_score, classify_all, confusion, metrics, select_biased_words, BiasScore,
    ConfusionMatrix, MetricReport, Predictions, DEFAULT_BIASED_WORDS,
};
use crate::geometry::{compute_gender_direction, debias_all, equalize_pairs, DebiasConfig, GenderDirection};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub ef_search: usize,
    pub biased_words: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            ef_search: DEFAULT_EF_SEARCH,
            biased_words: DEFAULT_BIASED_WORDS,
        }
    }
}

/// Result of running one configuration through debias and classification.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub debiased: EmbeddingSet,
    pub predictions: Predictions,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricReport,
}

/// Everything that stays fixed while debias strengths change: the original
/// vectors, the HNSW index over them, the gender axis and the label sets.
#[derive(Debug, Clone)]
pub struct Pipeline {
    original: Arc<EmbeddingSet>,
    /// All labels, used to name the nearest original word.
    labels: CategoryLabels,
    /// Labels minus gender pair words; these are the words classified.
    neutral: CategoryLabels,
    pairs: GenderPairSet,
    direction: GenderDirection,
    index: HnswIndex,
    options: PipelineOptions,
}

impl Pipeline {
    /// Computes the gender axis and builds the index over `original`.
    pub fn build(
        original: Arc<EmbeddingSet>,
        labels: CategoryLabels,
        pairs: GenderPairSet,
        hnsw: HnswParams,
        seed: u64,
        options: PipelineOptions,
    ) -> Result<Self, Error> {
        let direction = compute_gender_direction(&pairs, &original)?;
        let index = build_index(original.clone(), hnsw, seed)?;
        Self::from_parts(labels, pairs, direction, index, options)
    }

    pub fn from_parts(
        labels: CategoryLabels,
        pairs: GenderPairSet,
        direction: GenderDirection,
        index: HnswIndex,
        options: PipelineOptions,
    ) -> Result<Self, Error> {
        let original = index.embeddings().clone();
        let (neutral, _) = labels.without_pair_words(&pairs);
        if neutral.is_empty() {
            return Err(Error::NoNeutralWords);
        }
        Ok(Self {
            original,
            labels,
            neutral,
            pairs,
            direction,
            index,
            options,
        })
    }

    pub fn original(&self) -> &Arc<EmbeddingSet> {
        &self.original
    }

    pub fn labels(&self) -> &CategoryLabels {
        &self.labels
    }

    pub fn neutral_labels(&self) -> &CategoryLabels {
        &self.neutral
    }

    pub fn categories(&self) -> &[String] {
        self.labels.categories()
    }

    pub fn pairs(&self) -> &GenderPairSet {
        &self.pairs
    }

    pub fn direction(&self) -> &GenderDirection {
        &self.direction
    }

    pub fn index(&self) -> &HnswIndex {
        &self.index
    }

    pub fn options(&self) -> PipelineOptions {
        self.options
    }

    /// Neutralizes per `config`, then equalizes the pairs if requested.
    pub fn debias(&self, config: &DebiasConfig) -> Result<EmbeddingSet, Error> {
        let neutralized = debias_all(
            &self.original,
            &self.labels,
            &self.pairs,
            &self.direction,
            config,
        )?;
        if config.apply_equalize {
            Ok(equalize_pairs(&self.pairs, &neutralized, &self.direction)?)
        } else {
            Ok(neutralized)
        }
    }

    /// Classifies an already debiased set against the original index.
    pub fn classify(&self, debiased: &EmbeddingSet) -> Result<(Predictions, ConfusionMatrix, MetricReport), Error> {
        let predictions = classify_all(
            debiased,
            &self.index,
            &self.neutral,
            &self.labels,
            self.options.ef_search,
        )?;
        let cm = confusion(&self.neutral, &predictions)?;
        let report = metrics(&cm)?;
        Ok((predictions, cm, report))
    }

    pub fn evaluate(&self, config: &DebiasConfig) -> Result<Evaluation, Error> {
        let debiased = self.debias(config)?;
        let (predictions, confusion, metrics) = self.classify(&debiased)?;
        Ok(Evaluation {
            debiased,
            predictions,
            confusion,
            metrics,
        })
    }

    /// The most gender-loaded words of `category` in the original space.
    pub fn biased_words(&self, category: &str) -> Result<Vec<String>, Error> {
        Ok(select_biased_words(
            &self.original,
            &self.neutral,
            &self.direction,
            category,
            self.options.biased_words,
        )?)
    }

    pub fn category_bias(&self, debiased: &EmbeddingSet, category: &str) -> Result<BiasScore, Error> {
        let words = self.biased_words(category)?;
        Ok(bias_score(debiased, &words, &self.pairs)?)
    }
}
