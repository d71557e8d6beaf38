use std::path::Path;

use serde::Deserialize;

use super::{check_finite, npy, MatrixFormat};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Text descriptions paired with their embeddings (one row per description).
#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub descriptions: Vec<String>,
    pub embeddings: Matrix,
}

impl TextCorpus {
    pub fn new(descriptions: Vec<String>, embeddings: Matrix) -> Result<Self> {
        if descriptions.is_empty() {
            return Err(Error::Dimension("text corpus is empty".into()));
        }
        if descriptions.len() != embeddings.nrows() {
            return Err(Error::Dimension(format!(
                "{} descriptions but {} embedding rows",
                descriptions.len(),
                embeddings.nrows()
            )));
        }
        check_finite(&embeddings)?;
        Ok(TextCorpus {
            descriptions,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.descriptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptions.is_empty()
    }

    pub fn width(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn check_width(&self, d: usize) -> Result<()> {
        if self.width() != d {
            return Err(Error::Dimension(format!(
                "text embeddings have width {}, expected {d}",
                self.width()
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct Line {
    text: String,
}

/// Load descriptions from UTF-8 JSON lines (`{"text": ...}`) and their
/// embeddings from a matrix file with the same number of rows.
pub fn load_corpus(texts: &Path, embeddings: &Path) -> Result<TextCorpus> {
    let raw = std::fs::read_to_string(texts).map_err(|e| Error::io(texts, e))?;
    let mut descriptions = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| Error::format("jsonl", format!("line {}: {e}", i + 1)))?;
        descriptions.push(parsed.text);
    }
    let bytes = std::fs::read(embeddings).map_err(|e| Error::io(embeddings, e))?;
    let matrix = match MatrixFormat::from_path(embeddings) {
        MatrixFormat::Npy => npy::read(&bytes)?,
        MatrixFormat::Csv => super::csv_format::read(&bytes)?,
        MatrixFormat::Rawbin => super::container::decode_matrix(&bytes, String::new())?.into_data(),
    };
    TextCorpus::new(descriptions, matrix)
}
