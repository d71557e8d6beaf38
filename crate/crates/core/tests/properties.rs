//! Randomized invariants across module boundaries.

use proptest::prelude::*;

use rotsense::concepts::{decompose, reconstruction_fidelity, remove_and_reconstruct, DecomposeParams};
use rotsense::embedding_io::container::{decode_model, encode_model, Provenance};
use rotsense::embedding_io::{csv_format, normalize, npy};
use rotsense::hypotest::{p_value, ts1_kurtosis, ts3_rescaled, PConvention};
use rotsense::linalg::{frobenius, gaussian_matrix, orthonormality_residual, Matrix};
use rotsense::rng::substream;
use rotsense::spectra::{resample_with, truncated_svd, ResampleMethod};
use rotsense::varimax::{varimax_objective, varimax_rotate, VarimaxParams};
use rotsense::{EmbeddingMatrix, NormMode};

fn matrix(seed: u64, n: usize, d: usize) -> Matrix {
    gaussian_matrix(n, d, &mut substream(seed, 0, 0))
}

fn quick() -> VarimaxParams {
    VarimaxParams {
        tol: 1e-10,
        max_iter: 500,
        restarts: 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn varimax_returns_a_rotation_and_never_lowers_the_objective(seed in any::<u64>(), n in 6usize..60, k in 2usize..6) {
        let m = matrix(seed, n, k);
        let fit = varimax_rotate(&m, &quick(), seed).unwrap();
        let r = &fit.rotation.0;
        prop_assert!(orthonormality_residual(r) < 1e-10);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
        prop_assert!(frobenius(&(&fit.rotated - &m * r)) < 1e-10 * frobenius(&m).max(1.0));
        prop_assert!(fit.objective >= varimax_objective(&m) - 1e-12);
    }

    #[test]
    fn kurtosis_statistics_ignore_row_order_and_column_scale(seed in any::<u64>(), n in 6usize..50, k in 1usize..5, scale in 0.01f64..100.0) {
        let m = matrix(seed, n, k);
        let mut shuffled = m.clone();
        for i in 0..n {
            shuffled.set_row(i, &m.row((i * 7 + 3) % n));
        }
        // (7i + 3) mod n is a permutation only when gcd(7, n) = 1.
        prop_assume!(n % 7 != 0);
        let scaled = &m * scale;
        let t = ts1_kurtosis(&m).unwrap();
        prop_assert!((ts1_kurtosis(&shuffled).unwrap() - t).abs() < 1e-10);
        prop_assert!((ts1_kurtosis(&scaled).unwrap() - t).abs() < 1e-9);
        prop_assert!((ts3_rescaled(&scaled).unwrap() - ts3_rescaled(&m).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn resampling_keeps_row_norms(seed in any::<u64>(), n in 1usize..40, k in 1usize..6, haar in any::<bool>()) {
        let u = matrix(seed, n, k);
        let method = if haar { ResampleMethod::HaarRotation } else { ResampleMethod::SphereDirection };
        let r = resample_with(&u, method, &mut substream(seed, 1, 0));
        for i in 0..n {
            prop_assert!((r.row(i).norm() - u.row(i).norm()).abs() < 1e-12 * u.row(i).norm().max(1.0));
        }
    }

    #[test]
    fn p_values_lie_in_the_unit_interval(obs in -5.0f64..5.0, null in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        for conv in [PConvention::Paper, PConvention::StandardMc] {
            let p = p_value(obs, &null, conv);
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert!(p_value(obs, &null, PConvention::StandardMc) > 0.0);
    }

    #[test]
    fn decomposition_reproduces_the_truncated_svd(seed in any::<u64>(), n in 8usize..40, d in 3usize..10) {
        let a = EmbeddingMatrix::new(matrix(seed, n, d), None, "prop").unwrap();
        let k = 2 + (seed as usize % (n.min(d) - 1));
        let params = DecomposeParams { norm_mode: NormMode::None, varimax: quick(), ..DecomposeParams::default() };
        let model = decompose(&a, k, &params, seed).unwrap();
        let svd = truncated_svd(a.data(), k).unwrap();
        let diff = frobenius(&(model.reconstruct_normalized() - svd.reconstruct()));
        prop_assert!(diff <= 1e-8 * frobenius(a.data()));
        prop_assert!(orthonormality_residual(&model.y) < 1e-10);
        let full = remove_and_reconstruct(&model, &[], true).unwrap();
        let fid = reconstruction_fidelity(a.data(), full.data()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fid));
    }

    #[test]
    fn degree_scaling_inverts(seed in any::<u64>(), n in 2usize..30, d in 2usize..12) {
        let raw = matrix(seed, n, d).map(|x| x.abs() + 0.05);
        let a = EmbeddingMatrix::new(raw.clone(), None, "prop").unwrap();
        let (norm, rec) = normalize(&a, NormMode::Degree, 1e-8).unwrap();
        let back = rec.invert(&norm).unwrap();
        prop_assert!(frobenius(&(back - &raw)) <= 1e-10 * frobenius(&raw));
    }

    #[test]
    fn matrix_formats_round_trip(seed in any::<u64>(), n in 1usize..20, d in 1usize..8) {
        let m = matrix(seed, n, d);
        prop_assert_eq!(npy::read(&npy::write(&m)).unwrap(), m.clone());
        prop_assert_eq!(csv_format::read(&csv_format::write(&m).unwrap()).unwrap(), m);
    }
}

#[test]
fn model_container_round_trips_and_rejects_corruption() {
    let a = EmbeddingMatrix::new(matrix(5, 30, 6), None, "container").unwrap();
    let params = DecomposeParams {
        norm_mode: NormMode::L2Rows,
        ..DecomposeParams::default()
    };
    let model = decompose(&a, 3, &params, 5).unwrap();
    let bytes = encode_model(&model, &Provenance::new(Some("abc".into()))).unwrap();
    let (back, prov) = decode_model(&bytes).unwrap();
    assert_eq!(back, model);
    assert_eq!(prov.config_hash.as_deref(), Some("abc"));

    let mut bad = bytes.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 0x40;
    assert!(decode_model(&bad).is_err());
    assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
}
