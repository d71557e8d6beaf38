//! Downstream evaluation: zero-shot metrics, reconstruction fidelity,
//! synthetic benchmarks and the fixed-dictionary bound.

pub mod metrics;
pub mod synth;
pub mod theory;

use serde::{Deserialize, Serialize};

pub use metrics::{group_metrics, metrics_table, zero_shot_predict, GroupMetrics, GroupStat, PromptSet};
pub use theory::{fixed_dictionary_fit, misalignment, sigma_min};

use crate::concepts::{decompose_svd, reconstruction_fidelity, DecomposeParams};
use crate::embedding_io::{normalize, EmbeddingMatrix};
use crate::spectra::truncated_svd;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub k: usize,
    pub fidelity: f64,
}

/// Reconstruction fidelity of a `k`-concept model for every `k` in `ks`,
/// sorted by `k`.
///
/// Fidelity is the mean row cosine between the normalized matrix and its
/// reconstruction. Row scaling does not change cosines, so for `none` and
/// `l2_rows` this equals the original-space value; for `degree` the
/// normalized space is the one in which rank-`k` reconstructions are nested
/// projections, which is what makes the curve monotone.
pub fn fidelity_curve(
    a: &EmbeddingMatrix,
    ks: &[usize],
    params: &DecomposeParams,
    seed: u64,
) -> Result<Vec<FidelityPoint>> {
    let max_k = a.n().min(a.d());
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    match (ks.first(), ks.last()) {
        (Some(&lo), Some(&hi)) if lo >= 2 && hi <= max_k => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "ranks must be non-empty and lie in 2..={max_k}"
            )))
        }
    }
    let (normalized, scaling) = normalize(a, params.norm_mode, params.eps)?;
    let full = truncated_svd(&normalized, *ks.last().expect("non-empty"))?;
    ks.iter()
        .map(|&k| {
            let svd = full.leading(k.min(full.k()))?;
            let model = decompose_svd(&svd, scaling.clone(), a.ids().to_vec(), params, seed)?;
            Ok(FidelityPoint {
                k,
                fidelity: reconstruction_fidelity(&normalized, &model.reconstruct_normalized())?,
            })
        })
        .collect()
}
