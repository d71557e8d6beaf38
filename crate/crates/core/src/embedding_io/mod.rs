//! Loading, validation, scaling and persistence of embedding matrices.
//!
//! Supported inputs are a subset of NPY (v1.0, `<f4`/`<f8`, 2-D), RFC-4180
//! CSV, and the crate's own `rawbin` container. Models and reports are
//! persisted through [`container`].

pub mod container;
mod corpus;
pub mod csv_format;
pub mod npy;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

pub use container::{load_model, load_report, save_model, save_report};
pub use corpus::{load_corpus, TextCorpus};

/// Row-wise sample embeddings with per-row metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Matrix,
    ids: Vec<String>,
    labels: Option<Vec<usize>>,
    groups: Option<Vec<String>>,
    source: String,
}

impl EmbeddingMatrix {
    /// Validate and wrap `data`. Missing ids default to `"0".."n-1"`.
    pub fn new(data: Matrix, ids: Option<Vec<String>>, source: impl Into<String>) -> Result<Self> {
        let (n, d) = data.shape();
        if n < 2 || d < 2 {
            return Err(Error::Dimension(format!(
                "embedding matrix must be at least 2x2, got {n}x{d}"
            )));
        }
        check_finite(&data)?;
        let ids = match ids {
            Some(ids) => {
                if ids.len() != n {
                    return Err(Error::Dimension(format!("{} ids for {n} rows", ids.len())));
                }
                let mut seen = HashSet::with_capacity(n);
                for id in &ids {
                    if !seen.insert(id.as_str()) {
                        return Err(Error::DuplicateId(id.clone()));
                    }
                }
                ids
            }
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        Ok(EmbeddingMatrix {
            data,
            ids,
            labels: None,
            groups: None,
            source: source.into(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension(format!("{} labels for {} rows", labels.len(), self.n())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.n() {
            return Err(Error::Dimension(format!("{} groups for {} rows", groups.len(), self.n())));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Same metadata, new values. The replacement must have the same shape.
    pub fn with_data(&self, data: Matrix, source: impl Into<String>) -> Result<Self> {
        if data.shape() != self.data.shape() {
            return Err(Error::Dimension(format!(
                "replacement data is {:?}, expected {:?}",
                data.shape(),
                self.data.shape()
            )));
        }
        check_finite(&data)?;
        Ok(EmbeddingMatrix {
            data,
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            source: source.into(),
        })
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }
}

pub(crate) fn check_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j, value: v });
            }
        }
    }
    Ok(())
}

/// On-disk matrix formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Npy,
    Csv,
    Rawbin,
}

impl MatrixFormat {
    /// Guess from the file extension (`.npy`, `.csv`, anything else is rawbin).
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "npy" => MatrixFormat::Npy,
            Some(e) if e == "csv" => MatrixFormat::Csv,
            _ => MatrixFormat::Rawbin,
        }
    }
}

/// Read and validate an embedding matrix.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    match format {
        MatrixFormat::Npy => EmbeddingMatrix::new(npy::read(&bytes)?, None, source),
        MatrixFormat::Csv => EmbeddingMatrix::new(csv_format::read(&bytes)?, None, source),
        MatrixFormat::Rawbin => container::decode_matrix(&bytes, source),
    }
}

/// Write an embedding matrix. Only `rawbin` keeps ids, labels and groups.
pub fn save_matrix(path: &Path, matrix: &EmbeddingMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Npy => npy::write(matrix.data()),
        MatrixFormat::Csv => csv_format::write(matrix.data())?,
        MatrixFormat::Rawbin => container::encode_matrix(matrix)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Which rescaling is applied before decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    None,
    L2Rows,
    #[default]
    Degree,
}

impl std::str::FromStr for NormMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMode::None),
            "l2_rows" | "l2" => Ok(NormMode::L2Rows),
            "degree" => Ok(NormMode::Degree),
            other => Err(Error::InvalidArgument(format!("unknown norm mode {other:?}"))),
        }
    }
}

/// Everything needed to undo a normalization.
///
/// * `degree`: `Ã_ij = A_ij / sqrt(row_i · col_j)` with regularized degrees.
/// * `l2_rows`: `row_factors` are the original row norms, `Ã_ij = A_ij / row_i`.
/// * `none`: all factors are 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub mode: NormMode,
    pub row_factors: Vec<f64>,
    pub col_factors: Vec<f64>,
    pub tau_r: f64,
    pub tau_c: f64,
}

impl ScalingRecord {
    pub fn identity(n: usize, d: usize) -> Self {
        ScalingRecord {
            mode: NormMode::None,
            row_factors: vec![1.0; n],
            col_factors: vec![1.0; d],
            tau_r: 0.0,
            tau_c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = self
            .row_factors
            .iter()
            .chain(&self.col_factors)
            .all(|f| f.is_finite() && *f > 0.0);
        if !all_positive {
            return Err(Error::InvalidArgument("scaling factors must be positive and finite".into()));
        }
        if self.mode == NormMode::None
            && self.row_factors.iter().chain(&self.col_factors).any(|f| *f != 1.0)
        {
            return Err(Error::InvalidArgument("mode none requires unit factors".into()));
        }
        if self.mode == NormMode::L2Rows && self.col_factors.iter().any(|f| *f != 1.0) {
            return Err(Error::InvalidArgument("mode l2_rows requires unit column factors".into()));
        }
        Ok(())
    }

    /// Multiplier that maps normalized entry (i, j) back to the original scale.
    pub fn unscale(&self, i: usize, j: usize) -> f64 {
        match self.mode {
            NormMode::None => 1.0,
            NormMode::L2Rows => self.row_factors[i],
            NormMode::Degree => (self.row_factors[i] * self.col_factors[j]).sqrt(),
        }
    }

    /// Map a matrix from normalized space back to the original scale.
    pub fn invert(&self, normalized: &Matrix) -> Result<Matrix> {
        if normalized.shape() != (self.row_factors.len(), self.col_factors.len()) {
            return Err(Error::Dimension(format!(
                "scaling record is {}x{}, matrix is {:?}",
                self.row_factors.len(),
                self.col_factors.len(),
                normalized.shape()
            )));
        }
        Ok(Matrix::from_fn(normalized.nrows(), normalized.ncols(), |i, j| {
            normalized[(i, j)] * self.unscale(i, j)
        }))
    }
}

/// Regularized degree scaling `Ã = D_r^{-1/2} A D_c^{-1/2}`.
///
/// `D_r = diag(A·1 + τ_r)` with `τ_r` the mean row sum, and `D_c`
/// analogously over columns. Embeddings can have negative entries, so a
/// factor may be non-positive; any factor `≤ eps` is reported as
/// [`Error::NonPositiveDegree`] instead of being silently clamped.
pub fn normalize_degree(a: &EmbeddingMatrix, eps: f64) -> Result<(Matrix, ScalingRecord)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let m = a.data();
    let (n, d) = m.shape();
    let deg_r: Vec<f64> = (0..n).map(|i| m.row(i).sum()).collect();
    let deg_c: Vec<f64> = (0..d).map(|j| m.column(j).sum()).collect();
    let tau_r = deg_r.iter().sum::<f64>() / n as f64;
    let tau_c = deg_c.iter().sum::<f64>() / d as f64;
    let row_factors: Vec<f64> = deg_r.iter().map(|x| x + tau_r).collect();
    let col_factors: Vec<f64> = deg_c.iter().map(|x| x + tau_c).collect();
    for (axis, factors) in [("row", &row_factors), ("column", &col_factors)] {
        if let Some((index, &value)) = factors.iter().enumerate().find(|(_, f)| **f <= eps) {
            return Err(Error::NonPositiveDegree { axis, index, value });
        }
    }
    let scaled = Matrix::from_fn(n, d, |i, j| m[(i, j)] / (row_factors[i] * col_factors[j]).sqrt());
    Ok((
        scaled,
        ScalingRecord {
            mode: NormMode::Degree,
            row_factors,
            col_factors,
            tau_r,
            tau_c,
        },
    ))
}

/// Scale every row to unit Euclidean norm.
pub fn l2_normalize_rows(a: &EmbeddingMatrix) -> Result<(Matrix, ScalingRecord)> {
    let m = a.data();
    let (n, d) = m.shape();
    let norms: Vec<f64> = (0..n).map(|i| m.row(i).norm()).collect();
    if let Some(i) = norms.iter().position(|r| *r <= 1e-12) {
        return Err(Error::ZeroNormRow(i));
    }
    let scaled = Matrix::from_fn(n, d, |i, j| m[(i, j)] / norms[i]);
    Ok((
        scaled,
        ScalingRecord {
            mode: NormMode::L2Rows,
            row_factors: norms,
            col_factors: vec![1.0; d],
            tau_r: 0.0,
            tau_c: 0.0,
        },
    ))
}

/// Apply the requested normalization.
pub fn normalize(a: &EmbeddingMatrix, mode: NormMode, eps: f64) -> Result<(Matrix, ScalingRecord)> {
    match mode {
        NormMode::None => Ok((a.data().clone(), ScalingRecord::identity(a.n(), a.d()))),
        NormMode::L2Rows => l2_normalize_rows(a),
        NormMode::Degree => normalize_degree(a, eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::rng::substream;

    fn emb(rows: usize, cols: usize, values: &[f64]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(Matrix::from_row_slice(rows, cols, values), None, "test").unwrap()
    }

    #[test]
    fn validation() {
        assert!(EmbeddingMatrix::new(Matrix::zeros(1, 3), None, "").is_err());
        assert!(EmbeddingMatrix::new(Matrix::zeros(3, 1), None, "").is_err());
        let mut m = Matrix::zeros(3, 2);
        m[(2, 1)] = f64::INFINITY;
        match EmbeddingMatrix::new(m, None, "") {
            Err(Error::NonFinite { row: 2, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            EmbeddingMatrix::new(Matrix::zeros(2, 2), Some(dup), ""),
            Err(Error::DuplicateId(_))
        ));
        let e = emb(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.ids(), ["0", "1"]);
        assert!(e.clone().with_labels(vec![0]).is_err());
        assert!(e.with_groups(vec!["g".into(), "h".into()]).is_ok());
    }

    #[test]
    fn degree_all_ones() {
        let a = emb(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (s, rec) = normalize_degree(&a, 1e-8).unwrap();
        assert_eq!(rec.row_factors, vec![4.0, 4.0]);
        assert_eq!(rec.col_factors, vec![4.0, 4.0]);
        assert_eq!(rec.tau_r, 2.0);
        for x in s.iter() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_scalar_oracle() {
        // row sums 4, 8 -> tau 6 -> factors 10, 14; columns identical
        let a = emb(2, 2, &[1.0, 3.0, 3.0, 5.0]);
        let (s, _) = normalize_degree(&a, 1e-8).unwrap();
        let expected = [
            [1.0 / 10.0, 3.0 / 140f64.sqrt()],
            [3.0 / 140f64.sqrt(), 5.0 / 14.0],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[(i, j)] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_rejects_negative_rows() {
        let a = emb(3, 2, &[1.0, 1.0, -5.0, -5.0, 1.5, 1.5]);
        match normalize_degree(&a, 1e-8) {
            Err(Error::NonPositiveDegree { axis: "row", index: 1, value }) => assert!(value < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degree_round_trip() {
        let mut rng = substream(31, 0, 0);
        let m = gaussian_matrix(12, 7, &mut rng).map(|x: f64| x.abs() + 0.1);
        let a = EmbeddingMatrix::new(m.clone(), None, "").unwrap();
        let (s, rec) = normalize_degree(&a, 1e-8).unwrap();
        rec.validate().unwrap();
        let back = rec.invert(&s).unwrap();
        assert!((back - &m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn l2_rows() {
        let a = emb(2, 2, &[3.0, 4.0, 0.6, 0.8]);
        let (s, rec) = l2_normalize_rows(&a).unwrap();
        assert!((s[(0, 0)] - 0.6).abs() < 1e-15 && (s[(0, 1)] - 0.8).abs() < 1e-15);
        assert!((s[(1, 0)] - 0.6).abs() < 1e-12 && (s[(1, 1)] - 0.8).abs() < 1e-12);
        assert_eq!(rec.row_factors[0], 5.0);
        assert!((rec.invert(&s).unwrap() - a.data()).norm() < 1e-12);

        let mut rng = substream(32, 0, 0);
        let r = EmbeddingMatrix::new(gaussian_matrix(10, 5, &mut rng), None, "").unwrap();
        let (s, _) = l2_normalize_rows(&r).unwrap();
        for i in 0..10 {
            let norm: f64 = (0..5).map(|j| s[(i, j)] * s[(i, j)]).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }

        let z = emb(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(l2_normalize_rows(&z), Err(Error::ZeroNormRow(0))));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(MatrixFormat::from_path(Path::new("a.NPY")), MatrixFormat::Npy);
        assert_eq!(MatrixFormat::from_path(Path::new("a.csv")), MatrixFormat::Csv);
        assert_eq!(MatrixFormat::from_path(Path::new("a.bin")), MatrixFormat::Rawbin);
    }
}
