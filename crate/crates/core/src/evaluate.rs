//! Drift evaluation: nearest-neighbor category classification, confusion
//! matrices, accuracy / weighted F1, the gender bias score and the k-means
//! elbow diagnostic.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ann::{exact_knn, AnnError, HnswIndex};
use crate::corpus::{norm, CategoryLabels, EmbeddingSet, GenderPairSet};
use crate::geometry::{dot, GenderDirection};

pub const DEFAULT_BIASED_WORDS: usize = 20;
pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("debiased and original embeddings do not share a vocabulary")]
    VocabularyMismatch,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("category lists differ between matrices")]
    CategoryMismatch,
    #[error("confusion matrix holds no classified words")]
    EmptyMatrix,
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("word set is empty")]
    EmptyWordSet,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("cannot fit {k} clusters to {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("word {0:?} has a zero vector; cosine similarity undefined")]
    ZeroVector(String),
    #[error(transparent)]
    Ann(#[from] AnnError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Something that can name the nearest original vector to a query.
pub trait NearestNeighbor: Sync {
    fn nearest(&self, query: &[f64]) -> Result<Option<usize>>;
}

/// HNSW lookup with a fixed beam width.
pub struct IndexSearch<'a> {
    pub index: &'a HnswIndex,
    pub ef_search: usize,
}

impl NearestNeighbor for IndexSearch<'_> {
    fn nearest(&self, query: &[f64]) -> Result<Option<usize>> {
        Ok(self
            .index
            .search_knn(query, 1, self.ef_search.max(1))?
            .first()
            .map(|h| h.node_id))
    }
}

/// Full scan; the reference the HNSW path is checked against.
pub struct ExactSearch<'a> {
    pub set: &'a EmbeddingSet,
}

impl NearestNeighbor for ExactSearch<'_> {
    fn nearest(&self, query: &[f64]) -> Result<Option<usize>> {
        Ok(exact_knn(self.set, query, 1)?.first().map(|h| h.node_id))
    }
}

/// Predicted category per classified word. Words whose nearest original
/// vector carries no label are listed in `skipped`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub predicted: BTreeMap<String, String>,
    pub skipped: Vec<String>,
}

/// Classifies every labeled word of `debiased` by the label of its nearest
/// vector in the original space (self-matches allowed).
pub fn classify_all(
    debiased: &EmbeddingSet,
    index: &HnswIndex,
    labels: &CategoryLabels,
    reference_labels: &CategoryLabels,
    ef_search: usize,
) -> Result<Predictions> {
    let original = index.embeddings();
    check_same_vocabulary(debiased, original)?;
    classify_with(
        debiased,
        labels,
        reference_labels,
        &IndexSearch { index, ef_search },
    )
}

pub fn classify_all_exact(
    debiased: &EmbeddingSet,
    original: &EmbeddingSet,
    labels: &CategoryLabels,
    reference_labels: &CategoryLabels,
) -> Result<Predictions> {
    check_same_vocabulary(debiased, original)?;
    classify_with(debiased, labels, reference_labels, &ExactSearch { set: original })
}

fn check_same_vocabulary(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.len() != b.len() || a.dim() != b.dim() || a.words() != b.words() {
        return Err(EvalError::VocabularyMismatch);
    }
    Ok(())
}

/// `labels` selects the words to classify; `reference_labels` names the
/// category of whichever original vector is found nearest.
pub fn classify_with(
    debiased: &EmbeddingSet,
    labels: &CategoryLabels,
    reference_labels: &CategoryLabels,
    search: &dyn NearestNeighbor,
) -> Result<Predictions> {
    let targets = labels.labeled_ids(debiased);
    let results: Vec<(usize, Option<String>)> = targets
        .par_iter()
        .map(|&(id, _)| {
            let nearest = search.nearest(debiased.vector(id))?;
            let label = nearest
                .and_then(|n| reference_labels.category_of(debiased.word(n)))
                .map(str::to_string);
            Ok((id, label))
        })
        .collect::<Result<_>>()?;
    let mut out = Predictions::default();
    for (id, label) in results {
        let word = debiased.word(id).to_string();
        match label {
            Some(c) => {
                out.predicted.insert(word, c);
            }
            None => out.skipped.push(word),
        }
    }
    Ok(out)
}

/// Rows are true categories, columns predicted ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub row_normalized: Vec<Vec<f64>>,
    /// Categories with no classified word; their normalized rows are all zero.
    pub empty_rows: Vec<String>,
}

impl ConfusionMatrix {
    pub fn from_counts(categories: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        let mut empty_rows = Vec::new();
        let row_normalized = counts
            .iter()
            .zip(&categories)
            .map(|(row, c)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    empty_rows.push(c.clone());
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|&x| x as f64 / total as f64).collect()
                }
            })
            .collect();
        Self {
            categories,
            counts,
            row_normalized,
            empty_rows,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Tabulates true (from `labels`) against predicted categories.
pub fn confusion(labels: &CategoryLabels, predictions: &Predictions) -> Result<ConfusionMatrix> {
    let categories = labels.categories().to_vec();
    let k = categories.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (word, pred) in &predictions.predicted {
        let t = labels
            .index_of_word(word)
            .ok_or_else(|| EvalError::UnknownWord(word.clone()))?;
        let p = labels
            .category_index(pred)
            .ok_or_else(|| EvalError::UnknownCategory(pred.clone()))?;
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix::from_counts(categories, counts))
}

/// Elementwise difference of row-normalized matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffMatrix {
    pub categories: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn matrix_diff(after: &ConfusionMatrix, before: &ConfusionMatrix) -> Result<DiffMatrix> {
    if after.categories != before.categories {
        return Err(EvalError::CategoryMismatch);
    }
    let values = after
        .row_normalized
        .iter()
        .zip(&before.row_normalized)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    Ok(DiffMatrix {
        categories: after.categories.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub category: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Accuracy and support-weighted F1. A class never predicted gets precision 0;
/// a class with no support gets weight 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.categories.len();
    let mut per_class = Vec::with_capacity(k);
    let mut weighted = 0.0;
    for i in 0..k {
        let tp = cm.counts[i][i] as f64;
        let support: u64 = cm.counts[i].iter().sum();
        let predicted: u64 = (0..k).map(|r| cm.counts[r][i]).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        weighted += support as f64 * f1;
        per_class.push(ClassMetrics {
            category: cm.categories[i].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(MetricReport {
        accuracy: cm.correct() as f64 / total as f64,
        weighted_f1: weighted / total as f64,
        per_class,
    })
}

/// The `k` words of `category` with the largest `|<v, g>|`; ties keep
/// vocabulary order.
pub fn select_biased_words(
    set: &EmbeddingSet,
    labels: &CategoryLabels,
    g: &GenderDirection,
    category: &str,
    k: usize,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if labels.category_index(category).is_none() {
        return Err(EvalError::UnknownCategory(category.to_string()));
    }
    let mut scored: Vec<(f64, usize)> = labels
        .words_in(set, category)
        .into_iter()
        .map(|i| (dot(set.vector(i), g.axis()).abs(), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(_, i)| set.word(i).to_string())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub value: f64,
    pub male_anchor: Vec<f64>,
    pub female_anchor: Vec<f64>,
    pub word_set: Vec<String>,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let d = norm(a) * norm(b);
    (d > 0.0).then(|| dot(a, b) / d)
}

fn centroid<'a>(set: &'a EmbeddingSet, words: impl Iterator<Item = &'a String>) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; set.dim()];
    let mut n = 0usize;
    for w in words {
        let v = set
            .vector_of(w)
            .ok_or_else(|| EvalError::UnknownWord(w.clone()))?;
        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::EmptyWordSet);
    }
    let len = norm(&acc);
    if len == 0.0 {
        return Err(EvalError::ZeroVector("<anchor centroid>".into()));
    }
    Ok(acc.into_iter().map(|x| x / len).collect())
}

/// Mean of `cos(v, male) - cos(v, female)` over `word_set`, with the anchors
/// being the normalized centroids of the male and female pair words in
/// `debiased`.
pub fn bias_score(
    debiased: &EmbeddingSet,
    word_set: &[String],
    pairs: &GenderPairSet,
) -> Result<BiasScore> {
    if word_set.is_empty() {
        return Err(EvalError::EmptyWordSet);
    }
    let male_anchor = centroid(debiased, pairs.pairs().iter().map(|(m, _)| m))?;
    let female_anchor = centroid(debiased, pairs.pairs().iter().map(|(_, f)| f))?;
    let mut total = 0.0;
    for w in word_set {
        let v = debiased
            .vector_of(w)
            .ok_or_else(|| EvalError::UnknownWord(w.clone()))?;
        let cm = cosine(v, &male_anchor).ok_or_else(|| EvalError::ZeroVector(w.clone()))?;
        let cf = cosine(v, &female_anchor).ok_or_else(|| EvalError::ZeroVector(w.clone()))?;
        total += cm - cf;
    }
    Ok(BiasScore {
        value: total / word_set.len() as f64,
        male_anchor,
        female_anchor,
        word_set: word_set.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding. Returns `(inertia, iterations)`.
pub fn kmeans(set: &EmbeddingSet, k: usize, seed: u64) -> Result<(f64, usize)> {
    let n = set.len();
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > n {
        return Err(EvalError::TooManyClusters { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![set.vector(rng.gen_range(0..n)).to_vec()];
    let mut closest: Vec<f64> = set.rows().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Rounding can walk off the end; fall back to the farthest point.
            if closest[chosen] == 0.0 {
                chosen = (0..n)
                    .max_by(|&a, &b| closest[a].total_cmp(&closest[b]))
                    .unwrap_or(0);
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..n)
        };
        let c = set.vector(pick).to_vec();
        for (d, v) in closest.iter_mut().zip(set.rows()) {
            *d = d.min(sq_dist(v, &c));
        }
        centroids.push(c);
    }

    let dim = set.dim();
    let mut assign = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        for (a, v) in assign.iter_mut().zip(set.rows()) {
            *a = (0..k)
                .min_by(|&x, &y| sq_dist(v, &centroids[x]).total_cmp(&sq_dist(v, &centroids[y])))
                .unwrap_or(0);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, v) in assign.iter().zip(set.rows()) {
            counts[a] += 1;
            sums[a].iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        if shift <= KMEANS_TOLERANCE {
            break;
        }
    }
    let inertia = set
        .rows()
        .map(|v| {
            centroids
                .iter()
                .map(|c| sq_dist(v, c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok((inertia, iterations))
}

/// Inertia for each `k` in `k_range`; fits run in parallel.
pub fn kmeans_elbow(
    set: &EmbeddingSet,
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<ElbowPoint>> {
    k_range
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let (inertia, iterations) = kmeans(set, k, seed.wrapping_add(k as u64))?;
            Ok(ElbowPoint {
                k,
                inertia,
                iterations,
            })
        })
        .collect()
}
