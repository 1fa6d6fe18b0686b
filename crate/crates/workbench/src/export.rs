//! Debiased-embedding export in the same word2vec text format the loader reads.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use debias_core::corpus::{write_word2vec, EmbeddingSet};

use crate::error::{Result, WorkbenchError};

pub fn write_embeddings<W: Write>(set: &EmbeddingSet, out: W, target: &str) -> Result<()> {
    if set.is_empty() {
        return Err(WorkbenchError::Invalid("cannot export an empty embedding set".into()));
    }
    let mut out = BufWriter::new(out);
    write_word2vec(set, &mut out)
        .and_then(|_| out.flush())
        .map_err(WorkbenchError::io(target))
}

pub fn export_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(WorkbenchError::io(path))?;
    write_embeddings(set, file, &path.display().to_string())
}
