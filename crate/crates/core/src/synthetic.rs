//! Seeded synthetic fixtures: random unit sets, planted gender pairs and the
//! planted five-category corpus used to exercise the full sweep.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{write_word2vec, CategoryLabels, EmbeddingSet, GenderPairSet};

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn remove_component(v: &mut [f64], axis: &[f64]) {
    let d: f64 = v.iter().zip(axis).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(axis).for_each(|(x, a)| *x -= d * a);
}

/// Unit vector orthogonal to `axis` drawn from an isotropic Gaussian.
fn orthogonal_unit(rng: &mut ChaCha8Rng, axis: &[f64]) -> Vec<f64> {
    let mut v = gaussian(rng, axis.len());
    remove_component(&mut v, axis);
    unit(v)
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    unit(gaussian(rng, dim))
}

/// `n` uniformly random unit vectors named `w00000`, `w00001`, ...
pub fn random_unit_set(n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        data.extend(random_unit_vector(&mut rng, dim));
    }
    let words = (0..n).map(|i| format!("w{i:05}")).collect();
    EmbeddingSet::from_flat(words, data, dim).expect("generated rows are finite and unique")
}

/// Pairs `normalize(b_i + s*g* + e)` / `normalize(b_i - s*g* + e')` with
/// `b_i` random unit vectors and `e` Gaussian noise of standard deviation
/// `sigma` per component.
#[derive(Debug, Clone)]
pub struct PlantedPairs {
    pub set: EmbeddingSet,
    pub pairs: GenderPairSet,
    pub axis: Vec<f64>,
}

pub fn planted_pairs(n_pairs: usize, dim: usize, strength: f64, sigma: f64, seed: u64) -> PlantedPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = random_unit_vector(&mut rng, dim);
    let mut words = Vec::with_capacity(2 * n_pairs);
    let mut rows = Vec::with_capacity(2 * n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let base = orthogonal_unit(&mut rng, &axis);
        for (sign, prefix) in [(1.0, "m"), (-1.0, "f")] {
            let noise = gaussian(&mut rng, dim);
            let v: Vec<f64> = (0..dim)
                .map(|j| base[j] + sign * strength * axis[j] + sigma * noise[j])
                .collect();
            words.push(format!("{prefix}{i:03}"));
            rows.push(unit(v));
        }
        pairs.push((format!("m{i:03}"), format!("f{i:03}")));
    }
    let set = EmbeddingSet::from_rows(words, &rows).expect("generated rows are valid");
    let pairs = GenderPairSet::new(pairs, &set).expect("pair words are in the set");
    PlantedPairs { set, pairs, axis }
}

/// Shape of the planted category corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub dim: usize,
    pub words_per_category: usize,
    /// Category name and its mean gender loading.
    pub categories: Vec<(String, f64)>,
    /// Scale of the within-category Gaussian scatter around the center.
    pub spread: f64,
    /// Weight of the direction shared by all category centers; higher means
    /// more overlap between categories.
    pub center_mix: f64,
    /// A word's loading is uniform in `mean * [1 - jitter, 1 + jitter]`,
    /// clipped to `[0, max_loading]`.
    pub jitter: f64,
    pub max_loading: f64,
    pub pairs: usize,
    pub pair_strength: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            dim: 24,
            words_per_category: 500,
            categories: [
                ("politics", 0.6),
                ("science", 0.45),
                ("business", 0.35),
                ("sports", 0.25),
                ("entertainment", 0.15),
            ]
            .into_iter()
            .map(|(c, g)| (c.to_string(), g))
            .collect(),
            spread: 1.0,
            center_mix: 0.6,
            jitter: 1.0,
            max_loading: 0.8,
            pairs: 20,
            pair_strength: 0.5,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub set: EmbeddingSet,
    pub labels: CategoryLabels,
    pub pairs: GenderPairSet,
    pub axis: Vec<f64>,
    /// `(word, category)` in generation order.
    pub label_lines: Vec<(String, String)>,
}

/// Category words are `sqrt(1 - a^2) * p + a * g*` with `p` a unit vector
/// orthogonal to `g*` scattered around the category center and `a` the
/// word's gender loading. Pair words mirror a random orthogonal base across
/// `g*` and carry no label.
pub fn planted_corpus(config: &PlantedConfig) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let axis = random_unit_vector(&mut rng, dim);
    let shared = orthogonal_unit(&mut rng, &axis);
    let centers: Vec<Vec<f64>> = config
        .categories
        .iter()
        .map(|_| {
            let own = orthogonal_unit(&mut rng, &axis);
            unit(
                shared
                    .iter()
                    .zip(&own)
                    .map(|(s, o)| config.center_mix * s + (1.0 - config.center_mix) * o)
                    .collect(),
            )
        })
        .collect();

    let mut words = Vec::new();
    let mut rows = Vec::new();
    let mut label_lines = Vec::new();
    let scatter = config.spread / (dim as f64).sqrt();
    for ((name, loading), center) in config.categories.iter().zip(&centers) {
        for i in 0..config.words_per_category {
            let noise = gaussian(&mut rng, dim);
            let mut p: Vec<f64> = center.iter().zip(&noise).map(|(c, e)| c + scatter * e).collect();
            remove_component(&mut p, &axis);
            let p = unit(p);
            let a = (loading * rng.gen_range(1.0 - config.jitter..=1.0 + config.jitter)).clamp(0.0, config.max_loading);
            let b = (1.0 - a * a).sqrt();
            let v: Vec<f64> = p.iter().zip(&axis).map(|(x, g)| b * x + a * g).collect();
            let word = format!("{name}_{i:04}");
            label_lines.push((word.clone(), name.clone()));
            words.push(word);
            rows.push(v);
        }
    }
    let mut pair_names = Vec::with_capacity(config.pairs);
    for i in 0..config.pairs {
        let base = orthogonal_unit(&mut rng, &axis);
        for (sign, prefix) in [(1.0, "he"), (-1.0, "she")] {
            let v: Vec<f64> = base
                .iter()
                .zip(&axis)
                .map(|(b, g)| b + sign * config.pair_strength * g)
                .collect();
            words.push(format!("{prefix}_{i:02}"));
            rows.push(unit(v));
        }
        pair_names.push((format!("he_{i:02}"), format!("she_{i:02}")));
    }
    let set = EmbeddingSet::from_rows(words, &rows).expect("generated rows are valid");
    let labels = CategoryLabels::new(label_lines.clone(), &set).expect("labels name generated words");
    let pairs = GenderPairSet::new(pair_names, &set).expect("pair words are in the set");
    PlantedCorpus {
        set,
        labels,
        pairs,
        axis,
        label_lines,
    }
}

/// Paths of a corpus written to disk.
#[derive(Debug, Clone)]
pub struct FixtureFiles {
    pub embeddings: PathBuf,
    pub pairs: PathBuf,
    pub labels: PathBuf,
}

/// Writes `embeddings.txt`, `pairs.csv` and `labels.tsv` under `dir`.
pub fn write_fixture(
    dir: &Path,
    set: &EmbeddingSet,
    pairs: &GenderPairSet,
    label_lines: &[(String, String)],
) -> io::Result<FixtureFiles> {
    fs::create_dir_all(dir)?;
    let files = FixtureFiles {
        embeddings: dir.join("embeddings.txt"),
        pairs: dir.join("pairs.csv"),
        labels: dir.join("labels.tsv"),
    };
    let mut out = BufWriter::new(fs::File::create(&files.embeddings)?);
    write_word2vec(set, &mut out)?;
    out.flush()?;
    let mut out = BufWriter::new(fs::File::create(&files.pairs)?);
    for (m, f) in pairs.pairs() {
        writeln!(out, "{m},{f}")?;
    }
    out.flush()?;
    let mut out = BufWriter::new(fs::File::create(&files.labels)?);
    for (w, c) in label_lines {
        writeln!(out, "{w}\t{c}")?;
    }
    out.flush()?;
    Ok(files)
}
