//! Browser bindings for the `www/` demo page. Every function returns a JSON
//! string that the page parses and draws.

use rotsense::concepts::DecomposeParams;
use rotsense::eval::fidelity_curve;
use rotsense::eval::synth::{planted_concepts, KurtosisFamily};
use rotsense::hypotest::{run_test, TestParams};
use rotsense::linalg::{haar_stiefel, Matrix};
use rotsense::rng::{domain, substream};
use rotsense::spectra::truncated_svd;
use rotsense::varimax::{varimax_objective, varimax_rotate, VarimaxParams};
use rotsense::{EmbeddingMatrix, NormMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js(e: rotsense::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn points(m: &Matrix) -> Vec<[f64; 2]> {
    m.row_iter().map(|r| [r[0], r[1]]).collect()
}

#[derive(Serialize)]
struct RotationDemo {
    observed: Vec<[f64; 2]>,
    recovered: Vec<[f64; 2]>,
    objective_before: f64,
    objective_after: f64,
    recovered_angle_deg: f64,
}

/// Sparse two-column loadings mixed by a rotation of `angle_deg`, then
/// unmixed by Varimax. The recovered angle is reported modulo 90 degrees,
/// since signed permutations of the axes are indistinguishable.
#[wasm_bindgen]
pub fn rotation_demo(seed: u32, angle_deg: f64, n: usize) -> Result<String, JsError> {
    if n < 4 {
        return Err(JsError::new("need at least 4 points"));
    }
    let mut rng = substream(seed as u64, domain::SYNTH, 0);
    let family = KurtosisFamily::Exponential;
    let z = Matrix::from_fn(n, 2, |_, _| family.sample(&mut rng));
    let (s, c) = angle_deg.to_radians().sin_cos();
    let mixing = Matrix::from_row_slice(2, 2, &[c, s, -s, c]);
    let observed = &z * mixing;
    let fit = varimax_rotate(&observed, &VarimaxParams::default(), seed as u64).map_err(js)?;
    let r = &fit.rotation.0;
    let angle = r[(1, 0)].atan2(r[(0, 0)]).to_degrees().rem_euclid(90.0);
    to_json(&RotationDemo {
        observed: points(&observed),
        recovered: points(&fit.rotated),
        objective_before: varimax_objective(&observed),
        objective_after: fit.objective,
        recovered_angle_deg: angle,
    })
}

/// Rotation-sensitivity test on the top-`k` singular vectors of planted
/// heavy-tailed data (`structured`) or on Haar-random columns.
#[wasm_bindgen]
pub fn null_test(seed: u32, structured: bool, n: usize, k: usize, n_resample: usize) -> Result<String, JsError> {
    let mut rng = substream(seed as u64, domain::SYNTH, 1);
    let u = if structured {
        let planted = planted_concepts(n, 2 * k, k, KurtosisFamily::Exponential, 0.3, &mut rng).map_err(js)?;
        truncated_svd(&planted.a, k).map_err(js)?.u
    } else {
        haar_stiefel(n, k, &mut rng)
    };
    let params = TestParams {
        n_resample,
        seed: seed as u64,
        ..TestParams::default()
    };
    to_json(&run_test(&u, &params).map_err(js)?)
}

/// Fidelity of rank-`k` reconstructions of planted data, for every `k` from 2 to `d`.
#[wasm_bindgen]
pub fn fidelity(seed: u32, n: usize, d: usize, k_true: usize, noise: f64) -> Result<String, JsError> {
    let mut rng = substream(seed as u64, domain::SYNTH, 2);
    let planted = planted_concepts(n, d, k_true, KurtosisFamily::default(), noise, &mut rng).map_err(js)?;
    let a = EmbeddingMatrix::new(planted.a, None, "demo").map_err(js)?;
    let params = DecomposeParams {
        norm_mode: NormMode::None,
        ..DecomposeParams::default()
    };
    let ks: Vec<usize> = (2..=d.min(n)).collect();
    to_json(&fidelity_curve(&a, &ks, &params, seed as u64).map_err(js)?)
}
