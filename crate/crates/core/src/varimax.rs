//! The Varimax objective, its maximization over rotations, and canonical
//! ordering of rotated factors.
//!
//! The objective follows the per-column form
//! `v(M) = Σ_ℓ [ (1/n) Σ_i M_iℓ⁴ − ((1/n) Σ_i M_iℓ²)² ]`, i.e. the sum over
//! columns of the population variance of squared entries. Classical Kaiser
//! Varimax differs from this only by a constant factor.

use serde::{Deserialize, Serialize};

use crate::linalg::{par_map, polar_factor, Matrix};
use crate::rng::{domain, substream};
use crate::spectra::{sample_haar_rotation, RotationMatrix};
use crate::{Error, Result};

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarimaxParams {
    /// Stop when the relative objective gain of one iteration drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of starts: the identity plus `restarts - 1` Haar-random starts.
    pub restarts: usize,
}

impl Default for VarimaxParams {
    fn default() -> Self {
        VarimaxParams {
            tol: 1e-8,
            max_iter: 1000,
            restarts: 8,
        }
    }
}

impl VarimaxParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VarimaxResult {
    pub rotation: RotationMatrix,
    /// `input · rotation`.
    pub rotated: Matrix,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration of the winning start, beginning with
    /// the value at the start point.
    pub trace: Vec<f64>,
    /// Index of the start that produced the result (0 = identity).
    pub best_start: usize,
}

/// Varimax objective of an already-rotated matrix.
pub fn varimax_objective(m: &Matrix) -> f64 {
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|col| {
            let (mut s2, mut s4) = (0.0, 0.0);
            for &x in col.iter() {
                let x2 = x * x;
                s2 += x2;
                s4 += x2 * x2;
            }
            let m2 = s2 / n;
            s4 / n - m2 * m2
        })
        .sum()
}

/// Fills `b` with `L³ − L·diag(mean(L²))` and returns the objective of `l`.
fn gradient_direction(l: &Matrix, b: &mut Matrix) -> f64 {
    let n = l.nrows() as f64;
    let mut obj = 0.0;
    for j in 0..l.ncols() {
        let col = l.column(j);
        let (mut s2, mut s4) = (0.0, 0.0);
        for &x in col.iter() {
            let x2 = x * x;
            s2 += x2;
            s4 += x2 * x2;
        }
        let m2 = s2 / n;
        obj += s4 / n - m2 * m2;
        let mut out = b.column_mut(j);
        for (o, &x) in out.iter_mut().zip(col.iter()) {
            *o = x * (x * x - m2);
        }
    }
    obj
}

fn monotone_slack(obj: f64) -> f64 {
    1e-12 * obj.abs().max(f64::MIN_POSITIVE)
}

struct Run {
    rotation: Matrix,
    rotated: Matrix,
    objective: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// SVD fixed-point ascent from `start`.
///
/// Each step replaces `R` by the orthogonal polar factor of `MᵀB`, the
/// gradient of the objective. If a plain step would lower the objective the
/// step is damped by adding `γR` to `MᵀB` (doubling `γ`), which makes the
/// linearization a minorizer and restores monotone ascent.
fn ascend(m: &Matrix, start: Matrix, params: &VarimaxParams) -> Result<Run> {
    let (n, k) = m.shape();
    let mut r = start;
    let mut l = m * &r;
    let mut b = Matrix::zeros(n, k);
    let mut x = Matrix::zeros(k, k);
    let mut obj = gradient_direction(&l, &mut b);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        x.gemm_tr(1.0, m, &b, 0.0);
        let mut r_new = polar_factor(&x).ok_or(Error::SvdNonConvergence)?;
        let mut l_new = m * &r_new;
        let mut obj_new = varimax_objective(&l_new);

        if obj_new < obj - monotone_slack(obj) {
            let mut gamma = x.norm().max(f64::MIN_POSITIVE);
            let mut accepted = false;
            for _ in 0..64 {
                let damped = &x + &r * gamma;
                r_new = polar_factor(&damped).ok_or(Error::SvdNonConvergence)?;
                l_new = m * &r_new;
                obj_new = varimax_objective(&l_new);
                if obj_new >= obj - monotone_slack(obj) {
                    accepted = true;
                    break;
                }
                gamma *= 2.0;
            }
            if !accepted {
                converged = true;
                break;
            }
        }

        let gain = (obj_new - obj) / obj.abs().max(f64::MIN_POSITIVE);
        r = r_new;
        l = l_new;
        obj = gradient_direction(&l, &mut b);
        trace.push(obj);
        if gain < params.tol {
            converged = true;
            break;
        }
    }

    Ok(Run {
        rotation: r,
        rotated: l,
        objective: obj,
        iterations,
        converged,
        trace,
    })
}

/// Maximize the Varimax objective of `m · R` over rotations `R`.
///
/// Start 0 is the identity; starts `1..restarts` are Haar-random rotations
/// drawn from per-start substreams of `seed`, so the result is independent of
/// thread count. The best objective wins, ties going to the lower start. The
/// returned rotation has determinant +1 (a column sign flip, which leaves the
/// objective unchanged, is applied when needed). Hitting `max_iter` is not an
/// error; the result carries `converged = false`.
pub fn varimax_rotate(m: &Matrix, params: &VarimaxParams, seed: u64) -> Result<VarimaxResult> {
    let (n, k) = m.shape();
    if n < 2 || k < 2 {
        return Err(Error::Dimension(format!(
            "varimax needs n >= 2 and k >= 2, got {n}x{k}"
        )));
    }
    params.validate()?;

    let runs = par_map(params.restarts, |start| {
        let r0 = if start == 0 {
            Matrix::identity(k, k)
        } else {
            let mut rng = substream(seed, domain::RESTART, start as u64);
            sample_haar_rotation(k, &mut rng).into_inner()
        };
        ascend(m, r0, params)
    });

    let mut best: Option<(usize, Run)> = None;
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        let better = match &best {
            None => true,
            Some((_, b)) => run.objective > b.objective,
        };
        if better {
            best = Some((i, run));
        }
    }
    let (best_start, mut run) = best.expect("at least one start");

    if run.rotation.determinant() < 0.0 {
        run.rotation.column_mut(k - 1).neg_mut();
        run.rotated.column_mut(k - 1).neg_mut();
    }
    let objective = varimax_objective(&run.rotated);

    Ok(VarimaxResult {
        rotation: RotationMatrix(run.rotation),
        rotated: run.rotated,
        objective,
        iterations: run.iterations,
        converged: run.converged,
        trace: run.trace,
        best_start,
    })
}

/// Column reordering and sign changes applied by [`canonicalize`]: output
/// column `c` is `signs[c] ·` input column `source[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPermutation {
    pub source: Vec<usize>,
    pub signs: Vec<f64>,
}

/// Fix the sign and order ambiguity of a factor pair `(Z, Y)`.
///
/// Each column is signed so that the largest-magnitude entry of its `Y`
/// column is positive, then columns are sorted by descending `Σ_i Z_iℓ²`.
/// The same signed permutation is applied to both, so `Z·Yᵀ` is unchanged.
pub fn canonicalize(z: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix, SignedPermutation)> {
    let k = z.ncols();
    if y.ncols() != k {
        return Err(Error::Dimension(format!(
            "loadings have {k} columns but dictionary has {}",
            y.ncols()
        )));
    }
    let signs: Vec<f64> = (0..k)
        .map(|j| {
            let col = y.column(j);
            let mut best = 0usize;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col.len() > 0 && col[best] < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let energy: Vec<f64> = (0..k).map(|j| z.column(j).norm_squared()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));

    let mut z_out = Matrix::zeros(z.nrows(), k);
    let mut y_out = Matrix::zeros(y.nrows(), k);
    for (c, &src) in order.iter().enumerate() {
        z_out.set_column(c, &(z.column(src) * signs[src]));
        y_out.set_column(c, &(y.column(src) * signs[src]));
    }
    let perm = SignedPermutation {
        signs: order.iter().map(|&s| signs[s]).collect(),
        source: order,
    };
    Ok((z_out, y_out, perm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, orthonormality_residual, signed_permutation_alignment};
    use crate::rng::substream;

    fn naive_objective(m: &Matrix) -> f64 {
        let n = m.nrows();
        let mut total = 0.0;
        for l in 0..m.ncols() {
            let mut second = 0.0;
            for q in 0..n {
                second += m[(q, l)].powi(2);
            }
            second /= n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                acc += m[(i, l)].powi(4) - second * second;
            }
            total += acc / n as f64;
        }
        total
    }

    #[test]
    fn identity_objective() {
        let m = Matrix::identity(2, 2);
        assert!((varimax_objective(&m) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_column_contributes_zero() {
        let m = Matrix::from_element(7, 1, 0.37);
        assert!(varimax_objective(&m).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_double_loop() {
        let mut rng = substream(21, 0, 0);
        let m = gaussian_matrix(100, 3, &mut rng);
        assert!((varimax_objective(&m) - naive_objective(&m)).abs() < 1e-12);
    }

    #[test]
    fn objective_invariant_to_row_permutation_and_sign() {
        let mut rng = substream(22, 0, 0);
        let m = gaussian_matrix(30, 4, &mut rng);
        let v = varimax_objective(&m);
        let mut p = m.clone();
        p.swap_rows(0, 17);
        p.swap_rows(3, 29);
        assert!((varimax_objective(&p) - v).abs() < 1e-12);
        assert!((varimax_objective(&(-&m)) - v).abs() < 1e-12);
    }

    fn sparse_planted(n: usize, k: usize, seed: u64) -> Matrix {
        // each row loads on a single column
        let mut rng = substream(seed, 0, 0);
        let g = gaussian_matrix(n, 1, &mut rng);
        let mut z = Matrix::zeros(n, k);
        for i in 0..n {
            z[(i, i % k)] = 1.0 + g[(i, 0)].abs();
        }
        z
    }

    #[test]
    fn sparse_input_gives_signed_permutation() {
        let z = sparse_planted(300, 4, 23);
        let res = varimax_rotate(&z, &VarimaxParams::default(), 1).unwrap();
        let r = res.rotation.as_matrix();
        for i in 0..4 {
            let mut row: Vec<f64> = r.row(i).iter().map(|x| x.abs()).collect();
            row.sort_by(|a, b| b.total_cmp(a));
            assert!((row[0] - 1.0).abs() <= 1e-6, "{r}");
            assert!(row[1] <= 1e-6);
        }
    }

    #[test]
    fn result_is_rotation_and_consistent() {
        let mut rng = substream(24, 0, 0);
        let m = gaussian_matrix(200, 5, &mut rng);
        let res = varimax_rotate(&m, &VarimaxParams::default(), 9).unwrap();
        let r = res.rotation.as_matrix();
        assert!(orthonormality_residual(r) < 1e-10);
        assert!((r.determinant() - 1.0).abs() < 1e-8);
        assert!((varimax_objective(&res.rotated) - res.objective).abs() < 1e-10 * res.objective.abs().max(1.0));
        assert!((&m * r - &res.rotated).norm() < 1e-10);
        assert!(res.objective >= varimax_objective(&m) - 1e-12);
    }

    #[test]
    fn trace_is_monotone() {
        let mut rng = substream(25, 0, 0);
        for seed in 0..5 {
            let m = gaussian_matrix(150, 6, &mut rng);
            let m = m.map(|x: f64| x * x.abs());
            let res = varimax_rotate(&m, &VarimaxParams { restarts: 3, ..Default::default() }, seed).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn beats_random_rotations() {
        let mut rng = substream(26, 0, 0);
        let m = gaussian_matrix(300, 4, &mut rng).map(|x: f64| x.powi(3));
        let res = varimax_rotate(&m, &VarimaxParams::default(), 3).unwrap();
        for _ in 0..1000 {
            let r = sample_haar_rotation(4, &mut rng);
            assert!(varimax_objective(&(&m * &r.0)) <= res.objective + 1e-12);
        }
    }

    #[test]
    fn plant_and_recover() {
        // centered sparse Bernoulli(0.1) loadings, kurtosis ≈ 8.1
        let mut rng = substream(27, 0, 0);
        let (n, k) = (5000, 6);
        let p = 0.1;
        let sd = (p * (1.0 - p) as f64).sqrt();
        let z = Matrix::from_fn(n, k, |_, _| {
            let hit: f64 = if rand::Rng::random::<f64>(&mut rng) < p { 1.0 } else { 0.0 };
            (hit - p) / sd
        });
        let r_tilde = sample_haar_rotation(k, &mut rng);
        let m = &z * r_tilde.0.transpose();
        let res = varimax_rotate(&m, &VarimaxParams::default(), 5).unwrap();
        let (score, _) = signed_permutation_alignment(&res.rotated, &z);
        assert!(score >= 0.99, "alignment {score}");
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(varimax_rotate(&Matrix::zeros(5, 1), &VarimaxParams::default(), 0).is_err());
        assert!(varimax_rotate(&Matrix::zeros(1, 3), &VarimaxParams::default(), 0).is_err());
        let bad = VarimaxParams { tol: 0.0, ..Default::default() };
        assert!(varimax_rotate(&Matrix::identity(3, 3), &bad, 0).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let mut rng = substream(28, 0, 0);
        let m = gaussian_matrix(500, 8, &mut rng);
        let params = VarimaxParams { tol: 1e-15, max_iter: 2, restarts: 1 };
        let res = varimax_rotate(&m, &params, 0).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
    }

    #[test]
    fn canonicalize_is_sign_and_permutation_invariant() {
        let mut rng = substream(29, 0, 0);
        let z = gaussian_matrix(20, 3, &mut rng);
        let y = gaussian_matrix(8, 3, &mut rng);
        let (z0, y0, _) = canonicalize(&z, &y).unwrap();

        let mut z1 = z.clone();
        let mut y1 = y.clone();
        z1.column_mut(1).neg_mut();
        y1.column_mut(1).neg_mut();
        let (z1c, y1c, _) = canonicalize(&z1, &y1).unwrap();
        assert_eq!(z0, z1c);
        assert_eq!(y0, y1c);

        let mut z2 = z.clone();
        let mut y2 = y.clone();
        z2.swap_columns(0, 2);
        y2.swap_columns(0, 2);
        let (z2c, y2c, _) = canonicalize(&z2, &y2).unwrap();
        assert_eq!(z0, z2c);
        assert_eq!(y0, y2c);
    }

    #[test]
    fn canonicalize_preserves_product() {
        let mut rng = substream(30, 0, 0);
        let z = gaussian_matrix(25, 4, &mut rng);
        let y = gaussian_matrix(9, 4, &mut rng);
        let (zc, yc, perm) = canonicalize(&z, &y).unwrap();
        assert!((&zc * yc.transpose() - &z * y.transpose()).norm() <= 1e-12);
        for (c, &src) in perm.source.iter().enumerate() {
            assert_eq!(zc.column(c), z.column(src) * perm.signs[c]);
        }
        let energies: Vec<f64> = (0..4).map(|j| zc.column(j).norm_squared()).collect();
        assert!(energies.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..4 {
            let col = yc.column(j);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }
}
