//! Word-embedding gender debiasing with per-category strength.
//!
//! The pipeline computes a gender axis from word pairs, removes a fraction
//! `theta` of every labeled word's projection onto it (per category),
//! classifies each debiased word by its nearest original neighbor through an
//! HNSW index and scores the result. The tuner sweeps `theta` per category and
//! extracts the performance / bias Pareto front and a balanced setting.

pub mod ann;
pub mod corpus;
pub mod evaluate;
pub mod geometry;
pub mod pipeline;
pub mod synthetic;
pub mod tuner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Ann(#[from] ann::AnnError),
    #[error(transparent)]
    Eval(#[from] evaluate::EvalError),
    #[error("every labeled word is also a gender pair word")]
    NoNeutralWords,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("category {0:?} has no words to score bias on")]
    NoBiasedWords(String),
    #[error("invalid theta grid: {0}")]
    InvalidGrid(String),
    #[error("sweep holds no points")]
    EmptySweep,
    #[error("objective weights must both be positive")]
    InvalidWeights,
}

impl Error {
    /// True for errors caused by bad caller input rather than bad data or I/O.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::UnknownCategory(_)
                | Error::InvalidGrid(_)
                | Error::InvalidWeights
                | Error::Geometry(geometry::GeometryError::ThetaOutOfRange(_))
                | Error::Geometry(geometry::GeometryError::UnknownCategory(_))
                | Error::Eval(evaluate::EvalError::UnknownCategory(_))
        )
    }
}
