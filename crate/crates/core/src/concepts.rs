//! Concept decomposition of an embedding matrix into sparse loadings and an
//! orthonormal dictionary, plus interpretation, arithmetic, spurious-concept
//! detection and removal.
//!
//! After normalization `Ã ≈ U·D·Vᵀ` at rank `k`, Varimax finds the rotation
//! `R` maximizing the sparsity of `U·D·R`; the model stores `Z = U·D·R` and
//! `Y = V·R`, so `Z·Yᵀ = U·D·Vᵀ` and the rotation only redistributes the
//! rank-`k` approximation across concepts.

use serde::{Deserialize, Serialize};

use crate::embedding_io::{normalize, EmbeddingMatrix, NormMode, ScalingRecord, TextCorpus};
use crate::linalg::{cosine, orthonormality_residual, row_vec, Matrix, Vector};
use crate::rng::{derive_seed, domain};
use crate::spectra::{truncated_svd, TruncatedSvd};
use crate::varimax::{canonicalize, varimax_rotate, VarimaxParams};
use crate::{Error, Result};

/// Default contrast margin for [`detect_spurious`].
pub const DEFAULT_MARGIN: f64 = 0.05;

/// A fitted decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptModel {
    /// d×k concept dictionary with orthonormal columns.
    pub y: Matrix,
    /// n×k sample loadings.
    pub z: Matrix,
    pub scaling: ScalingRecord,
    /// Sample ids, one per row of `z`.
    pub ids: Vec<String>,
    pub seed: u64,
    pub canonical: bool,
    /// Singular values of the normalized matrix at the fitted rank.
    pub singular_values: Vec<f64>,
}

impl ConceptModel {
    pub fn k(&self) -> usize {
        self.y.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.z.ncols() != k {
            return Err(Error::Dimension(format!(
                "dictionary has {k} columns, loadings have {}",
                self.z.ncols()
            )));
        }
        if self.ids.len() != self.z.nrows() || self.scaling.row_factors.len() != self.z.nrows() {
            return Err(Error::Dimension("ids and row factors must match the loading rows".into()));
        }
        if self.scaling.col_factors.len() != self.y.nrows() {
            return Err(Error::Dimension("column factors must match the dictionary rows".into()));
        }
        if self.singular_values.len() != k {
            return Err(Error::Dimension("one singular value per concept expected".into()));
        }
        self.scaling.validate()?;
        let residual = orthonormality_residual(&self.y);
        if residual > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "dictionary columns are not orthonormal (residual {residual:.3e})"
            )));
        }
        Ok(())
    }

    pub fn check_concept(&self, index: usize) -> Result<()> {
        if index >= self.k() {
            return Err(Error::InvalidConcept { index, k: self.k() });
        }
        Ok(())
    }

    /// Rank-`k` reconstruction `Z·Yᵀ` in normalized space.
    pub fn reconstruct_normalized(&self) -> Matrix {
        &self.z * self.y.transpose()
    }
}

/// Settings for [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub norm_mode: NormMode,
    /// Smallest admissible degree factor.
    pub eps: f64,
    pub varimax: VarimaxParams,
    pub canonical: bool,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            norm_mode: NormMode::Degree,
            eps: 1e-8,
            varimax: VarimaxParams::default(),
            canonical: true,
        }
    }
}

/// Normalize, factorize and Varimax-rotate `a` into `k` concepts.
pub fn decompose(a: &EmbeddingMatrix, k: usize, params: &DecomposeParams, seed: u64) -> Result<ConceptModel> {
    let max_k = a.n().min(a.d());
    if k < 2 || k > max_k {
        return Err(Error::InvalidArgument(format!("k must lie in 2..={max_k}, got {k}")));
    }
    let (normalized, scaling) = normalize(a, params.norm_mode, params.eps)?;
    let svd = truncated_svd(&normalized, k)?;
    decompose_svd(&svd, scaling, a.ids().to_vec(), params, seed)
}

/// Rotate an existing factorization. `svd` must come from the matrix that
/// `scaling` describes.
pub fn decompose_svd(
    svd: &TruncatedSvd,
    scaling: ScalingRecord,
    ids: Vec<String>,
    params: &DecomposeParams,
    seed: u64,
) -> Result<ConceptModel> {
    if svd.k() < 2 {
        return Err(Error::Dimension(format!(
            "only {} nonzero singular values; at least 2 concepts are needed",
            svd.k()
        )));
    }
    let ud = svd.scaled_u();
    let fit = varimax_rotate(&ud, &params.varimax, derive_seed(seed, domain::DECOMPOSE, 0))?;
    if !fit.converged {
        log::warn!("varimax stopped after {} iterations without converging", fit.iterations);
    }
    let mut z = fit.rotated;
    let mut y = &svd.v * fit.rotation.as_matrix();
    if params.canonical {
        let (cz, cy, _) = canonicalize(&z, &y)?;
        z = cz;
        y = cy;
    }
    let model = ConceptModel {
        y,
        z,
        scaling,
        ids,
        seed,
        canonical: params.canonical,
        singular_values: svd.d.clone(),
    };
    model.validate()?;
    Ok(model)
}

/// Mean over concepts of `max_i |Z_ij| / ‖Z_·j‖₂`, a simple peakedness score.
pub fn loading_peakedness(z: &Matrix) -> f64 {
    let k = z.ncols();
    z.column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm == 0.0 {
                0.0
            } else {
                c.amax() / norm
            }
        })
        .sum::<f64>()
        / k as f64
}

/// Concept-space coordinates of text embeddings, `T·Y`.
pub fn loadings_for_text(corpus: &TextCorpus, model: &ConceptModel) -> Result<Matrix> {
    corpus.check_width(model.y.nrows())?;
    Ok(&corpus.embeddings * &model.y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredImage {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub score: f64,
}

/// Top samples and descriptions for one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptInterpretation {
    pub index: usize,
    pub top_images: Vec<ScoredImage>,
    pub top_texts: Vec<ScoredText>,
}

/// Indices of the `r` largest values, descending, ties to the lower index.
pub fn top_indices(values: impl Iterator<Item = f64>, r: usize) -> Vec<usize> {
    let values: Vec<f64> = values.collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(r);
    order
}

/// For every concept, the `r` samples with the largest loadings and the `r`
/// descriptions with the largest projections.
pub fn interpret(model: &ConceptModel, corpus: &TextCorpus, r: usize) -> Result<Vec<ConceptInterpretation>> {
    if r == 0 || r > corpus.len() || r > model.z.nrows() {
        return Err(Error::InvalidArgument(format!(
            "r must lie in 1..={} (corpus size {}, samples {}), got {r}",
            corpus.len().min(model.z.nrows()),
            corpus.len(),
            model.z.nrows()
        )));
    }
    let text_loadings = loadings_for_text(corpus, model)?;
    Ok((0..model.k())
        .map(|j| {
            let top_images = top_indices(model.z.column(j).iter().copied(), r)
                .into_iter()
                .map(|i| ScoredImage {
                    id: model.ids[i].clone(),
                    score: model.z[(i, j)],
                })
                .collect();
            let top_texts = top_indices(text_loadings.column(j).iter().copied(), r)
                .into_iter()
                .map(|i| ScoredText {
                    text: corpus.descriptions[i].clone(),
                    score: text_loadings[(i, j)],
                })
                .collect();
            ConceptInterpretation {
                index: j,
                top_images,
                top_texts,
            }
        })
        .collect())
}

/// `Σ w_j · Y_·j` for the given `(concept, weight)` terms.
pub fn concept_arithmetic(model: &ConceptModel, terms: &[(usize, f64)]) -> Result<Vector> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("concept arithmetic needs at least one term".into()));
    }
    let mut direction = Vector::zeros(model.y.nrows());
    for &(j, w) in terms {
        model.check_concept(j)?;
        direction.axpy(w, &model.y.column(j), 1.0);
    }
    Ok(direction)
}

/// Raw inner-product scores `M·c` of every row of `m` against a direction.
pub fn score_rows(m: &Matrix, direction: &Vector) -> Result<Vec<f64>> {
    if m.ncols() != direction.len() {
        return Err(Error::Dimension(format!(
            "matrix width {} does not match direction length {}",
            m.ncols(),
            direction.len()
        )));
    }
    Ok((m * direction).iter().copied().collect())
}

/// Concepts whose dictionary direction is closer to a nuisance corpus than to
/// the target corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousReport {
    pub concept_indices: Vec<usize>,
    pub target_sim: Vec<f64>,
    pub spurious_sim: Vec<f64>,
    pub margin: f64,
}

fn mean_abs_cosine(direction: &[f64], corpus: &TextCorpus) -> f64 {
    (0..corpus.len())
        .map(|i| cosine(direction, &row_vec(&corpus.embeddings, i)).abs())
        .sum::<f64>()
        / corpus.len() as f64
}

/// Flag concept `j` when its mean absolute cosine similarity to
/// `spurious_texts` exceeds that to `target_texts` by more than `margin`.
///
/// Absolute values are used because a concept direction is only defined up
/// to sign, and a nuisance corpus usually names both poles of the nuisance
/// (e.g. "land background" and "water background").
pub fn detect_spurious(
    model: &ConceptModel,
    target_texts: &TextCorpus,
    spurious_texts: &TextCorpus,
    margin: f64,
) -> Result<SpuriousReport> {
    let d = model.y.nrows();
    for corpus in [target_texts, spurious_texts] {
        corpus.check_width(d)?;
        if let Some(i) = (0..corpus.len()).find(|&i| corpus.embeddings.row(i).norm() == 0.0) {
            return Err(Error::ZeroNormRow(i));
        }
    }
    if !margin.is_finite() {
        return Err(Error::InvalidArgument("margin must be finite".into()));
    }
    let mut report = SpuriousReport {
        concept_indices: Vec::new(),
        target_sim: Vec::with_capacity(model.k()),
        spurious_sim: Vec::with_capacity(model.k()),
        margin,
    };
    for j in 0..model.k() {
        let y: Vec<f64> = model.y.column(j).iter().copied().collect();
        let t = mean_abs_cosine(&y, target_texts);
        let s = mean_abs_cosine(&y, spurious_texts);
        if s - t > margin {
            report.concept_indices.push(j);
        }
        report.target_sim.push(t);
        report.spurious_sim.push(s);
    }
    Ok(report)
}

/// Zero the loadings of `remove` and rebuild `Z′·Yᵀ`, optionally mapped back
/// to the original scale.
pub fn remove_and_reconstruct(model: &ConceptModel, remove: &[usize], invert_scaling: bool) -> Result<EmbeddingMatrix> {
    let mut z = model.z.clone();
    for &j in remove {
        model.check_concept(j)?;
        z.column_mut(j).fill(0.0);
    }
    let mut recon = &z * model.y.transpose();
    if invert_scaling {
        recon = model.scaling.invert(&recon)?;
    }
    EmbeddingMatrix::new(recon, Some(model.ids.clone()), "reconstruction")
}

/// Mean row-wise cosine similarity between `a` and `a_hat`. Zero rows of
/// `a_hat` contribute 0.
pub fn reconstruction_fidelity(a: &Matrix, a_hat: &Matrix) -> Result<f64> {
    if a.shape() != a_hat.shape() {
        return Err(Error::Dimension(format!(
            "shapes differ: {:?} vs {:?}",
            a.shape(),
            a_hat.shape()
        )));
    }
    let n = a.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let row = a.row(i);
        let norm = row.norm();
        if norm <= 1e-12 {
            return Err(Error::ZeroNormRow(i));
        }
        let other = a_hat.row(i);
        let other_norm = other.norm();
        if other_norm > 0.0 {
            total += row.dot(&other) / (norm * other_norm);
        }
    }
    Ok(total / n as f64)
}
