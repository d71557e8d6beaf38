//! Kurtosis and Varimax statistics and the Monte-Carlo test for
//! rotation-sensitive structure.
//!
//! The null distribution is produced by rotating every row of `U`
//! independently (which keeps row norms and destroys any preferred
//! direction), Varimax-rotating the result and recomputing the statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linalg::{par_map, Matrix};
use crate::rng::{derive_seed, domain, substream};
use crate::spectra::{drop_leading_component, resample_with, ResampleMethod, TruncatedSvd};
use crate::varimax::{varimax_rotate, VarimaxParams};
use crate::{Error, Result, TOOL_VERSION};

/// Per-column population moments `(mean, m2, m4)` about the mean.
fn central_moments(col: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64, f64) {
    let mean = col.clone().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in col {
        let c = x - mean;
        let c2 = c * c;
        m2 += c2;
        m4 += c2 * c2;
    }
    (mean, m2 / n, m4 / n)
}

/// Non-excess kurtosis `E[(X−μ)⁴] / E[(X−μ)²]²` of every column.
fn column_kurtosis(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n < 4 {
        return Err(Error::Dimension(format!("kurtosis needs at least 4 rows, got {n}")));
    }
    (0..m.ncols())
        .map(|j| {
            let col = m.column(j);
            let (_, m2, m4) = central_moments(col.iter().copied(), n as f64);
            let scale = col.amax();
            if m2 <= (1e-14 * scale).powi(2) || m2 == 0.0 {
                return Err(Error::ZeroVariance(j));
            }
            Ok(m4 / (m2 * m2))
        })
        .collect()
}

/// Mean absolute excess kurtosis over columns, with population moments.
pub fn ts1_kurtosis(m: &Matrix) -> Result<f64> {
    let kurt = column_kurtosis(m)?;
    Ok(kurt.iter().map(|k| (k - 3.0).abs()).sum::<f64>() / kurt.len() as f64)
}

/// Rescaled kurtosis statistic, asymptotically standard normal when the
/// columns are Haar-distributed singular vectors.
///
/// `sqrt(n·k/24) · ( (1/k) Σ_i kurt_i − 3n/(n+2) )` with `kurt_i` the
/// non-excess column kurtosis; `3n/(n+2)` is its exact mean for a uniform
/// unit vector in `R^n` and `24/n` the leading term of its variance.
pub fn ts3_rescaled(m: &Matrix) -> Result<f64> {
    let kurt = column_kurtosis(m)?;
    let (n, k) = (m.nrows() as f64, kurt.len() as f64);
    let mean_abs = kurt.iter().map(|x| x.abs()).sum::<f64>() / k;
    Ok((n * k / 24.0).sqrt() * (mean_abs - 3.0 * n / (n + 2.0)))
}

/// Maximized Varimax objective.
pub fn ts2_varimax(m: &Matrix, params: &VarimaxParams, seed: u64) -> Result<f64> {
    Ok(varimax_rotate(m, params, seed)?.objective)
}

/// How Monte-Carlo p-values are formed from the null draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PConvention {
    /// `(1/N) Σ 1[TS_obs > TS_null,i]`, the literal formula of the original
    /// algorithm; large when the observed statistic exceeds the null.
    Paper,
    /// `(1 + #{TS_null,i ≥ TS_obs}) / (N + 1)`; small values indicate
    /// rotation-sensitive structure and are never exactly zero.
    #[default]
    StandardMc,
}

impl std::str::FromStr for PConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(PConvention::Paper),
            "standard_mc" | "standard" => Ok(PConvention::StandardMc),
            other => Err(Error::InvalidArgument(format!("unknown p-value convention {other:?}"))),
        }
    }
}

/// Monte-Carlo p-value of `observed` against `null` draws.
pub fn p_value(observed: f64, null: &[f64], convention: PConvention) -> f64 {
    let n = null.len() as f64;
    match convention {
        PConvention::Paper => null.iter().filter(|&&t| observed > t).count() as f64 / n,
        PConvention::StandardMc => (1.0 + null.iter().filter(|&&t| t >= observed).count() as f64) / (n + 1.0),
    }
}

/// Settings of one test run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub n_resample: usize,
    pub seed: u64,
    pub p_convention: PConvention,
    pub varimax: VarimaxParams,
    pub resample_method: ResampleMethod,
}

/// Smallest resample count for which a 0.05-level decision is possible.
pub const MIN_RESAMPLES: usize = 19;

impl Default for TestParams {
    fn default() -> Self {
        TestParams {
            n_resample: 199,
            seed: 0,
            p_convention: PConvention::StandardMc,
            varimax: default_test_varimax(),
            resample_method: ResampleMethod::SphereDirection,
        }
    }
}

/// Optimizer settings used inside the test. Every resample needs its own
/// Varimax fit, so one start with a capped budget is used. The observed and
/// null matrices go through the same optimizer, which is what calibration
/// needs; a tighter fit only moves both sides together.
pub fn default_test_varimax() -> VarimaxParams {
    VarimaxParams {
        tol: 1e-6,
        max_iter: 100,
        restarts: 1,
    }
}

/// Outcome of [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub ts1_obs: f64,
    pub ts2_obs: f64,
    pub ts3_obs: f64,
    pub null_ts1: Vec<f64>,
    pub null_ts2: Vec<f64>,
    pub p_kur: f64,
    pub p_var: f64,
    pub n_resample: usize,
    pub n_rows: usize,
    pub k_used: usize,
    pub dropped_leading: bool,
    pub seed: u64,
    pub p_convention: PConvention,
    pub resample_method: ResampleMethod,
    pub varimax: VarimaxParams,
    pub tool_version: String,
}

impl TestReport {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(self.p_kur) || !in_unit(self.p_var) {
            return Err(Error::InvalidArgument("p-values must lie in [0, 1]".into()));
        }
        if self.null_ts1.len() != self.n_resample || self.null_ts2.len() != self.n_resample {
            return Err(Error::InvalidArgument("null arrays must have n_resample entries".into()));
        }
        Ok(())
    }

    /// Human-readable summary: observed statistics, p-values and null quantiles.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Rotation-sensitivity test\n");
        let _ = writeln!(
            s,
            "- rows: {}, rank used: {}, leading component dropped: {}",
            self.n_rows, self.k_used, self.dropped_leading
        );
        let _ = writeln!(
            s,
            "- resamples: {}, seed: {}, p-value convention: {}\n",
            self.n_resample,
            self.seed,
            match self.p_convention {
                PConvention::Paper => "paper",
                PConvention::StandardMc => "standard_mc",
            }
        );
        let _ = writeln!(s, "| statistic | observed | p-value | null q05 | null q50 | null q95 |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for (name, obs, p, null) in [
            ("TS1 (kurtosis)", self.ts1_obs, self.p_kur, &self.null_ts1),
            ("TS2 (varimax)", self.ts2_obs, self.p_var, &self.null_ts2),
        ] {
            let q = quantiles(null, &[0.05, 0.5, 0.95]);
            let _ = writeln!(
                s,
                "| {name} | {obs:.6e} | {p:.4} | {:.6e} | {:.6e} | {:.6e} |",
                q[0], q[1], q[2]
            );
        }
        let _ = writeln!(s, "\nTS3 (rescaled kurtosis): {:.4}", self.ts3_obs);
        s
    }
}

/// Linear-interpolation quantiles of `values`.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    probs
        .iter()
        .map(|p| {
            if v.is_empty() {
                return f64::NAN;
            }
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect()
}

/// Statistics `(TS1, TS2)` of the Varimax-rotated `u`.
fn rotated_statistics(u: &Matrix, varimax: &VarimaxParams, seed: u64) -> Result<(f64, f64)> {
    let fit = varimax_rotate(u, varimax, seed)?;
    Ok((ts1_kurtosis(&fit.rotated)?, fit.objective))
}

/// Monte-Carlo test of `u` (n×k, typically left singular vectors).
///
/// For each of `n_resample` draws, every row of `u` is rotated by an
/// independent Haar rotation, the result is Varimax-rotated and its TS1/TS2
/// recorded. The observed statistics come from the Varimax rotation of `u`
/// itself. Resample `i` uses its own substream of `params.seed`.
pub fn run_test(u: &Matrix, params: &TestParams) -> Result<TestReport> {
    let (n, k) = u.shape();
    if n < 4 || k < 2 {
        return Err(Error::Dimension(format!("test needs n >= 4 and k >= 2, got {n}x{k}")));
    }
    if params.n_resample < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "n_resample must be at least {MIN_RESAMPLES}, got {}",
            params.n_resample
        )));
    }
    params.varimax.validate()?;

    let observed_fit = varimax_rotate(u, &params.varimax, derive_seed(params.seed, domain::OBSERVED, 0))?;
    let ts1_obs = ts1_kurtosis(&observed_fit.rotated)?;
    let ts2_obs = observed_fit.objective;
    let ts3_obs = ts3_rescaled(&observed_fit.rotated)?;

    let draws = par_map(params.n_resample, |i| {
        let mut rng = substream(params.seed, domain::RESAMPLE, i as u64);
        let resampled = resample_with(u, params.resample_method, &mut rng);
        rotated_statistics(&resampled, &params.varimax, derive_seed(params.seed, domain::RESTART, i as u64))
    });
    let mut null_ts1 = Vec::with_capacity(params.n_resample);
    let mut null_ts2 = Vec::with_capacity(params.n_resample);
    for d in draws {
        let (t1, t2) = d?;
        null_ts1.push(t1);
        null_ts2.push(t2);
    }

    Ok(TestReport {
        p_kur: p_value(ts1_obs, &null_ts1, params.p_convention),
        p_var: p_value(ts2_obs, &null_ts2, params.p_convention),
        ts1_obs,
        ts2_obs,
        ts3_obs,
        null_ts1,
        null_ts2,
        n_resample: params.n_resample,
        n_rows: n,
        k_used: k,
        dropped_leading: false,
        seed: params.seed,
        p_convention: params.p_convention,
        resample_method: params.resample_method,
        varimax: params.varimax,
        tool_version: TOOL_VERSION.to_string(),
    })
}

/// Run the test on an SVD, optionally without its leading component.
pub fn test_svd(svd: &TruncatedSvd, drop_leading: bool, params: &TestParams) -> Result<TestReport> {
    let base = if drop_leading {
        drop_leading_component(svd)?
    } else {
        svd.clone()
    };
    let mut report = run_test(&base.u, params)?;
    report.dropped_leading = drop_leading;
    Ok(report)
}

/// One row of a rank sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub report: TestReport,
}

/// Run the test on the first `k` columns for every `k` in `ks`.
///
/// With `drop_leading`, column 0 is removed first and `k` counts the
/// remaining columns. Each rank uses a substream of `params.seed` keyed by `k`.
pub fn rank_sweep(
    svd: &TruncatedSvd,
    ks: &[usize],
    drop_leading: bool,
    params: &TestParams,
) -> Result<Vec<SweepEntry>> {
    let base = if drop_leading {
        drop_leading_component(svd)?
    } else {
        svd.clone()
    };
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k > base.k()) {
        return Err(Error::Dimension(format!(
            "rank {bad} outside 2..={} available after leading-component handling",
            base.k()
        )));
    }
    ks.iter()
        .map(|&k| {
            let u = base.u.columns(0, k).into_owned();
            let p = TestParams {
                seed: derive_seed(params.seed, domain::RANK, k as u64),
                ..*params
            };
            let mut report = run_test(&u, &p)?;
            report.dropped_leading = drop_leading;
            Ok(SweepEntry { k, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, haar_stiefel};
    use crate::rng::substream;

    fn naive_ts1(m: &Matrix) -> f64 {
        let (n, k) = m.shape();
        let mut total = 0.0;
        for j in 0..k {
            let mut mean = 0.0;
            for i in 0..n {
                mean += m[(i, j)];
            }
            mean /= n as f64;
            let mut m2 = 0.0;
            let mut m4 = 0.0;
            for i in 0..n {
                m2 += (m[(i, j)] - mean).powi(2);
                m4 += (m[(i, j)] - mean).powi(4);
            }
            m2 /= n as f64;
            m4 /= n as f64;
            total += (m4 / (m2 * m2) - 3.0).abs();
        }
        total / k as f64
    }

    #[test]
    fn two_point_column_has_ts1_two() {
        let m = Matrix::from_fn(10, 1, |i, _| if i % 2 == 0 { -1.0 } else { 1.0 });
        assert!((ts1_kurtosis(&m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ts1_matches_naive_loop() {
        let m = Matrix::from_row_slice(
            6,
            2,
            &[0.3, -1.2, 2.2, 0.4, -0.7, 0.9, 1.1, -2.0, 0.05, 0.6, -3.1, 1.7],
        );
        assert!((ts1_kurtosis(&m).unwrap() - naive_ts1(&m)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_ts1_is_small() {
        let mut rng = substream(51, 0, 0);
        let m = gaussian_matrix(1_000_000, 1, &mut rng);
        assert!(ts1_kurtosis(&m).unwrap() <= 0.02);
    }

    #[test]
    fn zero_variance_and_short_columns() {
        let m = Matrix::from_fn(8, 2, |i, j| if j == 0 { i as f64 } else { 2.0 });
        assert!(matches!(ts1_kurtosis(&m), Err(Error::ZeroVariance(1))));
        assert!(ts1_kurtosis(&Matrix::identity(3, 2)).is_err());
    }

    #[test]
    fn ts3_scale_invariance() {
        let mut rng = substream(52, 0, 0);
        let m = gaussian_matrix(200, 5, &mut rng);
        let t = ts3_rescaled(&m).unwrap();
        assert!((ts3_rescaled(&(&m * 2.0)).unwrap() - t).abs() < 1e-9);
        assert!((ts1_kurtosis(&(&m * 2.0)).unwrap() - ts1_kurtosis(&m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ts3_is_zero_at_haar_mean() {
        // ±1 on one row each and 0 elsewhere: raw kurtosis n/2. For n = 4 that
        // equals 3n/(n+2) = 2, so TS3 vanishes.
        let col = Matrix::from_column_slice(4, 1, &[1.0, -1.0, 0.0, 0.0]);
        assert!(ts3_rescaled(&col).unwrap().abs() < 1e-12);
        let col = Matrix::from_column_slice(6, 1, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = (6.0f64 / 24.0).sqrt() * (3.0 - 18.0 / 8.0);
        assert!((ts3_rescaled(&col).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ts2_invariant_to_starting_frame() {
        let mut rng = substream(53, 0, 0);
        let z = gaussian_matrix(400, 4, &mut rng).map(|x: f64| x.powi(3));
        let params = VarimaxParams::default();
        let base = ts2_varimax(&z, &params, 1).unwrap();
        for s in 0..3 {
            let r0 = crate::spectra::sample_haar_rotation(4, &mut rng);
            let rotated = &z * &r0.0;
            assert!((ts2_varimax(&rotated, &params, s).unwrap() - base).abs() <= 1e-6 * base.abs());
        }
    }

    #[test]
    fn strict_convention_counts_only_exceedances() {
        let null = vec![1.0; 25];
        assert_eq!(p_value(1.0, &null, PConvention::Paper), 0.0);
        assert_eq!(p_value(1.0, &null, PConvention::StandardMc), 1.0);
        assert_eq!(p_value(2.0, &null, PConvention::StandardMc), 1.0 / 26.0);
        assert_eq!(p_value(2.0, &null, PConvention::Paper), 1.0);
    }

    #[test]
    fn run_test_shapes_and_reproducibility() {
        let mut rng = substream(54, 0, 0);
        let u = haar_stiefel(200, 4, &mut rng);
        let params = TestParams {
            n_resample: 19,
            seed: 3,
            ..Default::default()
        };
        let a = run_test(&u, &params).unwrap();
        let b = run_test(&u, &params).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.null_ts1.len(), 19);
        assert!(a.p_kur >= 1.0 / 20.0 && a.p_var >= 1.0 / 20.0);
        assert!(run_test(&u, &TestParams { n_resample: 18, ..params }).is_err());
    }

    #[test]
    fn degenerate_sweep() {
        let mut rng = substream(55, 0, 0);
        let m = gaussian_matrix(60, 2, &mut rng);
        let svd = crate::spectra::truncated_svd(&m, 2).unwrap();
        let params = TestParams {
            n_resample: 19,
            ..Default::default()
        };
        let sweep = rank_sweep(&svd, &[2], false, &params).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].k, 2);
        assert!(rank_sweep(&svd, &[2], true, &params).is_err());
    }

    #[test]
    fn quantile_interpolation() {
        let q = quantiles(&[4.0, 1.0, 3.0, 2.0], &[0.0, 0.5, 1.0]);
        assert_eq!(q, vec![1.0, 2.5, 4.0]);
    }
}
