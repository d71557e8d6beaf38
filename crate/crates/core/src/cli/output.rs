//! Artifact writing and `--verify` re-checks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::OutputFormat;
use crate::concepts::ConceptModel;
use crate::embedding_io::container::{decode_json, decode_model, encode_json, encode_model, Provenance};
use crate::embedding_io::{load_matrix, save_matrix, EmbeddingMatrix, MatrixFormat};
use crate::hypotest::TestReport;
use crate::{Error, Result};

enum Written {
    Json { path: PathBuf, kind: String },
    Model(PathBuf),
    Matrix(PathBuf),
}

pub struct Output {
    dir: PathBuf,
    format: OutputFormat,
    provenance: Provenance,
    seed: u64,
    written: Vec<Written>,
}

impl Output {
    pub fn new(dir: &Path, format: OutputFormat, config_hash: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            format,
            provenance: Provenance::new(Some(config_hash)),
            seed,
            written: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        self.provenance.config_hash.as_deref().unwrap_or_default()
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// `<stem>.json` inside a checksummed envelope, unless only Markdown
    /// was requested.
    pub fn json<T: Serialize>(&mut self, stem: &str, kind: &str, body: &T) -> Result<()> {
        if self.format == OutputFormat::Md {
            return Ok(());
        }
        let bytes = encode_json(kind, body, &self.provenance)?;
        let path = self.write(&format!("{stem}.json"), &bytes)?;
        self.written.push(Written::Json {
            path,
            kind: kind.to_string(),
        });
        Ok(())
    }

    /// `<stem>.md` with a provenance header, unless only JSON was requested.
    pub fn markdown(&mut self, stem: &str, body: &str) -> Result<()> {
        if self.format == OutputFormat::Json {
            return Ok(());
        }
        let mut text = String::new();
        let _ = writeln!(
            text,
            "<!-- rotsense {} | seed {} | config {} -->\n",
            self.provenance.tool_version,
            self.seed,
            self.hash()
        );
        text.push_str(body);
        self.write(&format!("{stem}.md"), text.as_bytes())?;
        Ok(())
    }

    pub fn model(&mut self, name: &str, model: &ConceptModel) -> Result<PathBuf> {
        let path = self.write(name, &encode_model(model, &self.provenance)?)?;
        self.written.push(Written::Model(path.clone()));
        Ok(path)
    }

    /// Matrix container; the config hash is recorded in its source field.
    pub fn matrix(&mut self, name: &str, m: &EmbeddingMatrix, what: &str) -> Result<PathBuf> {
        let tagged = m.with_data(m.data().clone(), format!("{what} (config {})", self.hash()))?;
        let path = self.dir.join(name);
        save_matrix(&path, &tagged, MatrixFormat::Rawbin)?;
        self.written.push(Written::Matrix(path.clone()));
        Ok(path)
    }

    pub fn raw(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        self.write(name, bytes)
    }

    /// Re-read every artifact written so far and re-check its invariants.
    pub fn verify(&self) -> Result<usize> {
        for w in &self.written {
            match w {
                Written::Json { path, kind } => {
                    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                    if kind == "test_report" {
                        let (report, _): (TestReport, _) = decode_json(kind, &bytes)?;
                        report.validate()?;
                    } else {
                        let _: (Value, _) = decode_json(kind, &bytes)?;
                    }
                }
                Written::Model(path) => {
                    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                    let (model, prov) = decode_model(&bytes)?;
                    model.validate()?;
                    if prov != self.provenance {
                        return Err(Error::format("rawbin", "provenance changed on re-read"));
                    }
                }
                Written::Matrix(path) => {
                    load_matrix(path, MatrixFormat::Rawbin)?;
                }
            }
        }
        Ok(self.written.len())
    }
}
