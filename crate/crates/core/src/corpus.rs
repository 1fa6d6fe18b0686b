//! Loading and validation of embeddings, gender word pairs and category labels.
//!
//! Embeddings use the word2vec text format: a `<n> <m>` header followed by one
//! `<word> <f1> ... <fm>` row per word. Gender pairs are a headerless CSV of
//! `male,female` lines and labels a headerless TSV of `word<TAB>category` lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hiragana, katakana, kanji and the long-vowel mark.
pub const DEFAULT_VOCAB_PATTERN: &str = r"[\p{Hiragana}\p{Katakana}\p{Han}ー]+";

/// Tolerance used when deciding whether every row has unit norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] io::Error),
    #[error("malformed header {0:?}: expected \"<rows> <dim>\"")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("header declares {expected} rows but file holds {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("line {line}: duplicate word {word:?}")]
    DuplicateWord { line: usize, word: String },
    #[error("line {line}: cannot parse {token:?} as a number")]
    BadNumber { line: usize, token: String },
    #[error("word {word:?} has a non-finite component")]
    NonFinite { word: String },
    #[error("word {word:?} has a zero vector and cannot be normalized")]
    ZeroVector { word: String },
    #[error("invalid vocabulary pattern: {0}")]
    InvalidPattern(#[from] regex::Error),
    #[error("line {line}: malformed record {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("no gender pair survived the vocabulary check ({dropped} dropped)")]
    NoPairs { dropped: usize },
    #[error("no label survived the vocabulary check ({dropped} dropped)")]
    NoLabels { dropped: usize },
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("word {0:?} appears in more than one gender pair slot")]
    RepeatedPairWord(String),
    #[error("embedding set is empty")]
    EmptySet,
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Vocabulary plus its row-major `n x m` vector matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingSet {
    /// Builds a set from a flat row-major buffer, checking every invariant.
    /// The `normalized` flag is derived from the data.
    pub fn from_flat(words: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(CorpusError::MalformedHeader("dimension 0".into()));
        }
        if data.len() != words.len() * dim {
            return Err(CorpusError::DimensionMismatch {
                line: 0,
                expected: words.len() * dim,
                found: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::DuplicateWord {
                    line: i + 1,
                    word: w.clone(),
                });
            }
        }
        for (i, row) in data.chunks_exact(dim).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(CorpusError::NonFinite {
                    word: words[i].clone(),
                });
            }
        }
        let normalized = data
            .chunks_exact(dim)
            .all(|row| (norm(row) - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        Ok(Self {
            words,
            index,
            data,
            dim,
            normalized,
        })
    }

    pub fn from_rows(words: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        if words.len() != rows.len() {
            return Err(CorpusError::RowCountMismatch {
                expected: words.len(),
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(CorpusError::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(words, data, dim)
    }

    /// Same vocabulary, new vectors. Used by the debias transforms.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        assert_eq!(data.len(), self.data.len(), "vector buffer size changed");
        if let Some(i) = data
            .chunks_exact(self.dim)
            .position(|row| row.iter().any(|x| !x.is_finite()))
        {
            return Err(CorpusError::NonFinite {
                word: self.words[i].clone(),
            });
        }
        let normalized = data
            .chunks_exact(self.dim)
            .all(|row| (norm(row) - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        Ok(Self {
            words: self.words.clone(),
            index: self.index.clone(),
            data,
            dim: self.dim,
            normalized,
        })
    }

    /// Scales every row to unit length.
    pub fn normalize(mut self) -> Result<Self> {
        let dim = self.dim;
        for (i, row) in self.data.chunks_exact_mut(dim).enumerate() {
            let n = norm(row);
            if n == 0.0 {
                return Err(CorpusError::ZeroVector {
                    word: self.words[i].clone(),
                });
            }
            row.iter_mut().for_each(|x| *x /= n);
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector_of(&self, word: &str) -> Option<&[f64]> {
        self.id_of(word).map(|i| self.vector(i))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a word2vec text file. With `normalize`, every row is scaled to unit norm.
pub fn load_embeddings(path: impl AsRef<Path>, normalize: bool) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_word2vec(BufReader::new(file), normalize)
}

pub fn read_word2vec<R: BufRead>(reader: R, normalize: bool) -> Result<EmbeddingSet> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(CorpusError::MalformedHeader(String::new())),
    };
    let fields: Vec<&str> = tokens(&header).collect();
    let (rows, dim) = match fields.as_slice() {
        [n, m] => match (n.parse::<usize>(), m.parse::<usize>()) {
            (Ok(n), Ok(m)) if m > 0 => (n, m),
            _ => return Err(CorpusError::MalformedHeader(header)),
        },
        _ => return Err(CorpusError::MalformedHeader(header)),
    };

    let mut words = Vec::with_capacity(rows);
    let mut seen = HashSet::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = tokens(&line);
        let word = parts.next().unwrap_or_default().to_string();
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(CorpusError::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        if !seen.insert(word.clone()) {
            return Err(CorpusError::DuplicateWord {
                line: line_no,
                word,
            });
        }
        for tok in values {
            let x: f64 = tok.parse().map_err(|_| CorpusError::BadNumber {
                line: line_no,
                token: tok.to_string(),
            })?;
            if !x.is_finite() {
                return Err(CorpusError::NonFinite { word });
            }
            data.push(x);
        }
        words.push(word);
    }
    if words.len() != rows {
        return Err(CorpusError::RowCountMismatch {
            expected: rows,
            found: words.len(),
        });
    }
    let set = EmbeddingSet::from_flat(words, data, dim)?;
    if normalize {
        set.normalize()
    } else {
        Ok(set)
    }
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.trim_end_matches(['\r', '\n'])
        .split(' ')
        .filter(|t| !t.is_empty())
}

/// Writes the word2vec text format with 17 significant digits per value.
pub fn write_word2vec<W: Write>(set: &EmbeddingSet, mut out: W) -> io::Result<()> {
    writeln!(out, "{} {}", set.len(), set.dim())?;
    let mut line = String::new();
    for (word, row) in set.words().iter().zip(set.rows()) {
        line.clear();
        line.push_str(word);
        for x in row {
            use std::fmt::Write as _;
            let _ = write!(line, " {x:.16e}");
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterWarning {
    EmptyVocabulary,
}

#[derive(Debug, Clone)]
pub struct Filtered {
    pub set: EmbeddingSet,
    pub warning: Option<FilterWarning>,
}

/// Keeps the words that fully match `pattern`, preserving order.
pub fn filter_vocabulary(set: &EmbeddingSet, pattern: &str) -> Result<Filtered> {
    let re = Regex::new(&format!("^(?:{pattern})$"))?;
    let keep: Vec<usize> = (0..set.len()).filter(|&i| re.is_match(set.word(i))).collect();
    let words = keep.iter().map(|&i| set.word(i).to_string()).collect();
    let mut data = Vec::with_capacity(keep.len() * set.dim());
    for &i in &keep {
        data.extend_from_slice(set.vector(i));
    }
    let filtered = EmbeddingSet::from_flat(words, data, set.dim())?;
    let warning = filtered.is_empty().then_some(FilterWarning::EmptyVocabulary);
    Ok(Filtered {
        set: filtered,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    OutOfVocabulary,
    RepeatedPairWord,
    DuplicateLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub line: usize,
    pub words: Vec<String>,
    pub reason: DropReason,
}

/// Records discarded while joining a side file against the vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub dropped: Vec<DroppedRecord>,
}

impl DropReport {
    pub fn len(&self) -> usize {
        self.dropped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dropped.is_empty()
    }
}

/// Male/female word pairs that define the bias axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderPairSet {
    pairs: Vec<(String, String)>,
}

impl GenderPairSet {
    pub fn new(pairs: Vec<(String, String)>, set: &EmbeddingSet) -> Result<Self> {
        if pairs.is_empty() {
            return Err(CorpusError::NoPairs { dropped: 0 });
        }
        let mut seen = HashSet::new();
        for (m, f) in &pairs {
            for w in [m, f] {
                if !set.contains(w) {
                    return Err(CorpusError::UnknownWord(w.clone()));
                }
                if !seen.insert(w.as_str()) {
                    return Err(CorpusError::RepeatedPairWord(w.clone()));
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.pairs.iter().any(|(m, f)| m == word || f == word)
    }

    pub fn words(&self) -> HashSet<&str> {
        self.pairs
            .iter()
            .flat_map(|(m, f)| [m.as_str(), f.as_str()])
            .collect()
    }
}

pub fn load_gender_pairs(
    path: impl AsRef<Path>,
    set: &EmbeddingSet,
) -> Result<(GenderPairSet, DropReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_gender_pairs(BufReader::new(file), set)
}

/// Pairs with an out-of-vocabulary word, or a word already used by an
/// earlier pair, are dropped and reported.
pub fn read_gender_pairs<R: BufRead>(
    reader: R,
    set: &EmbeddingSet,
) -> Result<(GenderPairSet, DropReport)> {
    let mut pairs = Vec::new();
    let mut used: HashSet<String> = HashSet::new();
    let mut report = DropReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let content = line.trim_end_matches('\r');
        if content.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let (male, female) = match fields.as_slice() {
            [m, f] if !m.is_empty() && !f.is_empty() && m != f => (*m, *f),
            _ => {
                return Err(CorpusError::MalformedLine {
                    line: line_no,
                    content: content.to_string(),
                })
            }
        };
        let words = vec![male.to_string(), female.to_string()];
        let reason = if !set.contains(male) || !set.contains(female) {
            Some(DropReason::OutOfVocabulary)
        } else if used.contains(male) || used.contains(female) {
            Some(DropReason::RepeatedPairWord)
        } else {
            None
        };
        match reason {
            Some(reason) => report.dropped.push(DroppedRecord {
                line: line_no,
                words,
                reason,
            }),
            None => {
                used.insert(male.to_string());
                used.insert(female.to_string());
                pairs.push((male.to_string(), female.to_string()));
            }
        }
    }
    if pairs.is_empty() {
        return Err(CorpusError::NoPairs {
            dropped: report.len(),
        });
    }
    Ok((GenderPairSet { pairs }, report))
}

/// Word to category assignment. Categories are kept in sorted order, which
/// fixes the row/column order of every confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLabels {
    categories: Vec<String>,
    by_word: HashMap<String, usize>,
}

impl CategoryLabels {
    pub fn new<I, S, T>(labels: I, set: &EmbeddingSet) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let raw: Vec<(String, String)> = labels
            .into_iter()
            .map(|(w, c)| (w.into(), c.into()))
            .collect();
        for (w, _) in &raw {
            if !set.contains(w) {
                return Err(CorpusError::UnknownWord(w.clone()));
            }
        }
        Self::from_checked(raw).ok_or(CorpusError::NoLabels { dropped: 0 })
    }

    fn from_checked(raw: Vec<(String, String)>) -> Option<Self> {
        if raw.is_empty() {
            return None;
        }
        let categories: Vec<String> = raw
            .iter()
            .map(|(_, c)| c.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let by_word = raw
            .into_iter()
            .map(|(w, c)| {
                let idx = categories.binary_search(&c).expect("category collected above");
                (w, idx)
            })
            .collect();
        Some(Self {
            categories,
            by_word,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.binary_search_by(|c| c.as_str().cmp(category)).ok()
    }

    pub fn category_of(&self, word: &str) -> Option<&str> {
        self.by_word
            .get(word)
            .map(|&i| self.categories[i].as_str())
    }

    pub fn index_of_word(&self, word: &str) -> Option<usize> {
        self.by_word.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.by_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_word.is_empty()
    }

    /// `(word id, category index)` for every labeled word, in vocabulary order.
    pub fn labeled_ids(&self, set: &EmbeddingSet) -> Vec<(usize, usize)> {
        (0..set.len())
            .filter_map(|i| self.by_word.get(set.word(i)).map(|&c| (i, c)))
            .collect()
    }

    /// Labeled words of one category, in vocabulary order.
    pub fn words_in(&self, set: &EmbeddingSet, category: &str) -> Vec<usize> {
        match self.category_index(category) {
            Some(c) => self
                .labeled_ids(set)
                .into_iter()
                .filter(|&(_, k)| k == c)
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Per-category word counts, aligned with [`Self::categories`].
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.categories.len()];
        for &c in self.by_word.values() {
            counts[c] += 1;
        }
        counts
    }

    /// Drops the labels of gender pair words so that labeled words split into
    /// pair words and neutral words. The category list is kept as is.
    pub fn without_pair_words(&self, pairs: &GenderPairSet) -> (Self, Vec<String>) {
        let pair_words = pairs.words();
        let mut removed: Vec<String> = self
            .by_word
            .keys()
            .filter(|w| pair_words.contains(w.as_str()))
            .cloned()
            .collect();
        removed.sort();
        let by_word = self
            .by_word
            .iter()
            .filter(|(w, _)| !pair_words.contains(w.as_str()))
            .map(|(w, &c)| (w.clone(), c))
            .collect();
        (
            Self {
                categories: self.categories.clone(),
                by_word,
            },
            removed,
        )
    }
}

pub fn load_labels(
    path: impl AsRef<Path>,
    set: &EmbeddingSet,
) -> Result<(CategoryLabels, DropReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_labels(BufReader::new(file), set)
}

/// Words absent from the vocabulary are dropped; a repeated word keeps its
/// first label and the repeat is reported.
pub fn read_labels<R: BufRead>(
    reader: R,
    set: &EmbeddingSet,
) -> Result<(CategoryLabels, DropReport)> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    let mut report = DropReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let content = line.trim_end_matches('\r');
        if content.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split('\t').collect();
        let (word, category) = match fields.as_slice() {
            [w, c] if !w.trim().is_empty() && !c.trim().is_empty() => (w.trim(), c.trim()),
            _ => {
                return Err(CorpusError::MalformedLine {
                    line: line_no,
                    content: content.to_string(),
                })
            }
        };
        let reason = if !set.contains(word) {
            Some(DropReason::OutOfVocabulary)
        } else if seen.contains(word) {
            Some(DropReason::DuplicateLabel)
        } else {
            None
        };
        match reason {
            Some(reason) => report.dropped.push(DroppedRecord {
                line: line_no,
                words: vec![word.to_string()],
                reason,
            }),
            None => {
                seen.insert(word.to_string());
                raw.push((word.to_string(), category.to_string()));
            }
        }
    }
    let dropped = report.len();
    let labels = CategoryLabels::from_checked(raw).ok_or(CorpusError::NoLabels { dropped })?;
    Ok((labels, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn small_set(words: &[&str]) -> EmbeddingSet {
        let rows: Vec<Vec<f64>> = (0..words.len())
            .map(|i| {
                let mut v = vec![0.0; words.len().max(2)];
                v[i] = 1.0;
                v
            })
            .collect();
        EmbeddingSet::from_rows(words.iter().map(|w| w.to_string()).collect(), &rows).unwrap()
    }

    #[test]
    fn loads_and_normalizes() {
        let set = read_word2vec(Cursor::new("2 3\na 1 0 0\nb 0 2 0\n"), true).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.vector(0), &[1.0, 0.0, 0.0]);
        assert_eq!(set.vector(1), &[0.0, 1.0, 0.0]);
        assert!(set.is_normalized());
    }

    #[test]
    fn trailing_space_and_crlf_are_tolerated() {
        let set = read_word2vec(Cursor::new("1 2\r\nx 0.5 0.25 \r\n"), false).unwrap();
        assert_eq!(set.vector_of("x").unwrap(), &[0.5, 0.25]);
        assert!(!set.is_normalized());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = read_word2vec(Cursor::new("1 2\na 1 2 3\n"), false).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::DimensionMismatch {
                line: 2,
                expected: 2,
                found: 3
            }
        ));
    }

    #[test]
    fn rejects_bad_header_duplicates_and_non_finite() {
        assert!(matches!(
            read_word2vec(Cursor::new("two 3\n"), false),
            Err(CorpusError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_word2vec(Cursor::new(""), false),
            Err(CorpusError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_word2vec(Cursor::new("2 1\na 1\na 2\n"), false),
            Err(CorpusError::DuplicateWord { line: 3, .. })
        ));
        assert!(matches!(
            read_word2vec(Cursor::new("1 2\na NaN 1\n"), false),
            Err(CorpusError::NonFinite { .. })
        ));
        assert!(matches!(
            read_word2vec(Cursor::new("1 2\na inf 1\n"), false),
            Err(CorpusError::NonFinite { .. })
        ));
        assert!(matches!(
            read_word2vec(Cursor::new("2 2\na 1 1\n"), false),
            Err(CorpusError::RowCountMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn zero_vector_only_rejected_when_normalizing() {
        assert!(read_word2vec(Cursor::new("1 2\na 0 0\n"), false).is_ok());
        assert!(matches!(
            read_word2vec(Cursor::new("1 2\na 0 0\n"), true),
            Err(CorpusError::ZeroVector { .. })
        ));
    }

    #[test]
    fn default_pattern_keeps_japanese_nouns() {
        let set = small_set(&["犬", "dog3", "ネコ", "すし", "ラーメン", "東京2"]);
        let out = filter_vocabulary(&set, DEFAULT_VOCAB_PATTERN).unwrap();
        assert_eq!(out.set.words(), &["犬", "ネコ", "すし", "ラーメン"]);
        assert_eq!(out.set.vector_of("ネコ"), set.vector_of("ネコ"));
        assert_eq!(out.warning, None);
    }

    #[test]
    fn dot_star_is_identity_and_empty_result_warns() {
        let set = small_set(&["a", "b1", "犬"]);
        let all = filter_vocabulary(&set, ".*").unwrap();
        assert_eq!(all.set, set);
        let none = filter_vocabulary(&set, "[0-9]+").unwrap();
        assert!(none.set.is_empty());
        assert_eq!(none.warning, Some(FilterWarning::EmptyVocabulary));
        assert!(matches!(
            filter_vocabulary(&set, "[a-"),
            Err(CorpusError::InvalidPattern(_))
        ));
    }

    #[test]
    fn pairs_drop_out_of_vocabulary() {
        let set = small_set(&["man", "woman", "king"]);
        let (pairs, report) =
            read_gender_pairs(Cursor::new("man,woman\nking,ghost\n"), &set).unwrap();
        assert_eq!(pairs.pairs(), &[("man".to_string(), "woman".to_string())]);
        assert_eq!(report.len(), 1);
        assert_eq!(report.dropped[0].reason, DropReason::OutOfVocabulary);
        assert_eq!(report.dropped[0].line, 2);
    }

    #[test]
    fn pairs_errors() {
        let set = small_set(&["man", "woman"]);
        assert!(matches!(
            read_gender_pairs(Cursor::new(""), &set),
            Err(CorpusError::NoPairs { dropped: 0 })
        ));
        assert!(matches!(
            read_gender_pairs(Cursor::new("man;woman\n"), &set),
            Err(CorpusError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            read_gender_pairs(Cursor::new("man,woman,x\n"), &set),
            Err(CorpusError::MalformedLine { .. })
        ));
    }

    #[test]
    fn repeated_pair_word_is_dropped() {
        let set = small_set(&["man", "woman", "lady"]);
        let (pairs, report) =
            read_gender_pairs(Cursor::new("man,woman\nman,lady\n"), &set).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(report.dropped[0].reason, DropReason::RepeatedPairWord);
    }

    #[test]
    fn labels_restricted_to_vocabulary() {
        let set = small_set(&["犬", "猫"]);
        let (labels, report) =
            read_labels(Cursor::new("犬\tscience\n鳥\tsports\n"), &set).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!(labels.category_of("犬"), Some("science"));
        assert_eq!(labels.categories(), &["science"]);
        assert_eq!(report.len(), 1);
        assert!(matches!(
            read_labels(Cursor::new("鳥\tsports\n"), &set),
            Err(CorpusError::NoLabels { dropped: 1 })
        ));
        assert!(matches!(
            read_labels(Cursor::new("犬 science\n"), &set),
            Err(CorpusError::MalformedLine { .. })
        ));
    }

    #[test]
    fn categories_are_sorted() {
        let set = small_set(&["a", "b", "c"]);
        let labels =
            CategoryLabels::new([("a", "sports"), ("b", "business"), ("c", "politics")], &set)
                .unwrap();
        assert_eq!(labels.categories(), &["business", "politics", "sports"]);
        assert_eq!(labels.words_in(&set, "sports"), vec![0]);
        assert_eq!(labels.counts(), vec![1, 1, 1]);
    }

    #[test]
    fn pair_words_removed_from_labels() {
        let set = small_set(&["man", "woman", "doctor"]);
        let labels =
            CategoryLabels::new([("man", "x"), ("doctor", "x"), ("woman", "y")], &set).unwrap();
        let pairs = GenderPairSet::new(vec![("man".into(), "woman".into())], &set).unwrap();
        let (neutral, removed) = labels.without_pair_words(&pairs);
        assert_eq!(removed, vec!["man", "woman"]);
        assert_eq!(neutral.len(), 1);
        assert_eq!(neutral.categories(), labels.categories());
    }

    #[test]
    fn write_then_read_is_exact() {
        let set = EmbeddingSet::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![0.1, -1e-300], vec![std::f64::consts::PI, 1.0 / 3.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_word2vec(&set, &mut buf).unwrap();
        let back = read_word2vec(Cursor::new(buf), false).unwrap();
        assert_eq!(back.as_flat(), set.as_flat());
    }
}
