//! Truncated SVD, Haar-distributed rotations and row-wise rotation-invariant
//! resampling.

use log::warn;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{gaussian_matrix, Matrix};
use crate::{Error, Result};

/// Rank-`k` factorization `M ≈ U diag(D) Vᵀ`.
///
/// `u` is n×k and `v` is d×k, both with orthonormal columns; `d` is
/// non-increasing and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub d: Vec<f64>,
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// `U · diag(D)`.
    pub fn scaled_u(&self) -> Matrix {
        let mut m = self.u.clone();
        for (j, s) in self.d.iter().enumerate() {
            m.column_mut(j).scale_mut(*s);
        }
        m
    }

    /// `U · diag(D) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.scaled_u() * self.v.transpose()
    }

    /// First `k` components.
    pub fn leading(&self, k: usize) -> Result<TruncatedSvd> {
        if k == 0 || k > self.k() {
            return Err(Error::Dimension(format!(
                "cannot take {k} leading components of a rank-{} SVD",
                self.k()
            )));
        }
        Ok(TruncatedSvd {
            u: self.u.columns(0, k).into_owned(),
            d: self.d[..k].to_vec(),
            v: self.v.columns(0, k).into_owned(),
        })
    }
}

/// Rank-`k` truncated SVD of `m`.
///
/// Computed from a dense, deterministic SVD. Singular values that are zero at
/// working precision are dropped with a warning, so the result may have
/// fewer than `k` components.
pub fn truncated_svd(m: &Matrix, k: usize) -> Result<TruncatedSvd> {
    let (n, d) = m.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::Dimension(format!(
            "rank k={k} must lie in 1..={} for a {n}x{d} matrix",
            n.min(d)
        )));
    }
    let (u_full, s_full, v_full) = dense_svd(m)?;

    let mut order: Vec<usize> = (0..s_full.len()).collect();
    order.sort_by(|&a, &b| s_full[b].total_cmp(&s_full[a]).then(a.cmp(&b)));

    let smax = s_full[order[0]];
    let cutoff = smax * (n.max(d) as f64) * f64::EPSILON;
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .take(k)
        .filter(|&i| s_full[i] > cutoff && s_full[i] > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::Dimension("matrix is numerically zero".into()));
    }
    if kept.len() < k {
        warn!(
            "truncated_svd: {} of {k} requested singular values are zero; truncating to rank {}",
            k - kept.len(),
            kept.len()
        );
    }

    let u = Matrix::from_columns(&kept.iter().map(|&i| u_full.column(i)).collect::<Vec<_>>());
    let v = Matrix::from_columns(&kept.iter().map(|&i| v_full.column(i)).collect::<Vec<_>>());
    let d = kept.iter().map(|&i| s_full[i]).collect();
    Ok(TruncatedSvd { u, d, v })
}

/// Thin SVD returning (U n×r, singular values, V d×r), r = min(n, d).
///
/// Tall inputs are first reduced by a QR factorization so the iterative part
/// only sees an r×r matrix.
fn dense_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (n, d) = m.shape();
    if n >= 2 * d {
        let qr = m.clone().qr();
        let (q, r) = qr.unpack();
        let (ur, s, v) = small_svd(&r)?;
        Ok((q * ur, s, v))
    } else if d >= 2 * n {
        let (v, s, u) = dense_svd(&m.transpose())?;
        Ok((u, s, v))
    } else {
        small_svd(m)
    }
}

fn small_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdNonConvergence)?;
    let u = svd.u.ok_or(Error::SvdNonConvergence)?;
    let v = svd.v_t.ok_or(Error::SvdNonConvergence)?.transpose();
    Ok((u, svd.singular_values.iter().copied().collect(), v))
}

/// Remove the first component (typically a mean/offset direction).
pub fn drop_leading_component(svd: &TruncatedSvd) -> Result<TruncatedSvd> {
    let k = svd.k();
    if k < 2 {
        return Err(Error::Dimension(format!(
            "dropping the leading component needs k >= 2, got {k}"
        )));
    }
    Ok(TruncatedSvd {
        u: svd.u.columns(1, k - 1).into_owned(),
        d: svd.d[1..].to_vec(),
        v: svd.v.columns(1, k - 1).into_owned(),
    })
}

/// A k×k rotation: orthogonal with determinant +1.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(pub Matrix);

impl RotationMatrix {
    pub fn identity(k: usize) -> Self {
        RotationMatrix(Matrix::identity(k, k))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

/// Draw a Haar-uniform rotation from SO(k).
///
/// Sign-corrected QR of a Gaussian matrix gives a Haar element of O(k);
/// negating the last column when the determinant is −1 maps it onto SO(k)
/// while keeping the distribution uniform.
pub fn sample_haar_rotation<R: Rng + ?Sized>(k: usize, rng: &mut R) -> RotationMatrix {
    assert!(k >= 1, "rotation dimension must be positive");
    let g = gaussian_matrix(k, k, rng);
    let (mut q, r) = g.qr().unpack();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(k - 1).neg_mut();
    }
    RotationMatrix(q)
}

/// How the per-row random rotations are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    /// Draw a full Haar rotation for every row and apply it.
    HaarRotation,
    /// Draw the rotated row directly: for Haar `R` and fixed `u`, `R u` is
    /// uniform on the sphere of radius `‖u‖`, which a normalized Gaussian
    /// vector reproduces exactly in distribution at O(k) cost per row.
    #[default]
    SphereDirection,
}

/// Rotate every row of `u` by an independent Haar rotation.
///
/// Row norms are preserved; the directions become uniform on the sphere.
pub fn rotation_invariant_resample<R: Rng + ?Sized>(u: &Matrix, rng: &mut R) -> Matrix {
    resample_with(u, ResampleMethod::HaarRotation, rng)
}

pub fn resample_with<R: Rng + ?Sized>(u: &Matrix, method: ResampleMethod, rng: &mut R) -> Matrix {
    let (n, k) = u.shape();
    let mut out = Matrix::zeros(n, k);
    let mut row = DVector::zeros(k);
    let mut dir = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            row[j] = u[(i, j)];
        }
        match method {
            ResampleMethod::HaarRotation => {
                let r = sample_haar_rotation(k, rng);
                let rotated = &r.0 * &row;
                for j in 0..k {
                    out[(i, j)] = rotated[j];
                }
            }
            ResampleMethod::SphereDirection => {
                let norm = row.norm();
                let mut dn2: f64;
                loop {
                    dn2 = 0.0;
                    for x in dir.iter_mut() {
                        *x = rng.sample(StandardNormal);
                        dn2 += *x * *x;
                    }
                    if dn2 > 0.0 {
                        break;
                    }
                }
                let scale = norm / dn2.sqrt();
                for j in 0..k {
                    out[(i, j)] = dir[j] * scale;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, orthonormality_residual};
    use crate::rng::substream;

    #[test]
    fn diagonal_singular_values() {
        let mut m = Matrix::zeros(4, 3);
        m[(0, 0)] = 3.0;
        m[(1, 1)] = 2.0;
        m[(2, 2)] = 1.0;
        let svd = truncated_svd(&m, 2).unwrap();
        assert_eq!(svd.k(), 2);
        assert!((svd.d[0] - 3.0).abs() < 1e-12);
        assert!((svd.d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_reconstruction() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let m = &u * v.transpose();
        let svd = truncated_svd(&m, 1).unwrap();
        assert!((svd.d[0] - 1.0).abs() < 1e-12);
        assert!((svd.reconstruct() - m).norm() <= 1e-10);
    }

    #[test]
    fn zero_singular_values_are_truncated() {
        let u = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let m = &u * v.transpose();
        let svd = truncated_svd(&m, 3).unwrap();
        assert_eq!(svd.k(), 1);
    }

    #[test]
    fn k_out_of_range() {
        let m = Matrix::identity(3, 3);
        assert!(truncated_svd(&m, 0).is_err());
        assert!(truncated_svd(&m, 4).is_err());
    }

    #[test]
    fn random_full_rank_reconstruction() {
        let mut rng = substream(11, 0, 0);
        for (n, d) in [(50, 10), (10, 50), (12, 9)] {
            let m = gaussian_matrix(n, d, &mut rng);
            let k = n.min(d);
            let svd = truncated_svd(&m, k).unwrap();
            // independent residual check by direct multiplication
            assert!((svd.reconstruct() - &m).norm() <= 1e-8 * m.norm().max(1.0));
            assert!(orthonormality_residual(&svd.u) <= 1e-10);
            assert!(orthonormality_residual(&svd.v) <= 1e-10);
            assert!(svd.d.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn truncation_error_equals_tail_energy() {
        let mut rng = substream(12, 0, 0);
        let m = gaussian_matrix(60, 15, &mut rng);
        let full = truncated_svd(&m, 15).unwrap();
        for k in [1, 4, 9, 14] {
            let svd = truncated_svd(&m, k).unwrap();
            let tail: f64 = full.d[k..].iter().map(|s| s * s).sum::<f64>().sqrt();
            let err = (svd.reconstruct() - &m).norm();
            assert!((err - tail).abs() <= 1e-6 * tail);
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = substream(13, 0, 0);
        let m = gaussian_matrix(20, 8, &mut rng);
        let a = truncated_svd(&m, 5).unwrap();
        let b = truncated_svd(&(&m * 3.5), 5).unwrap();
        for (x, y) in a.d.iter().zip(&b.d) {
            assert!((3.5 * x - y).abs() <= 1e-10 * y);
        }
    }

    #[test]
    fn drop_leading_slices() {
        let mut rng = substream(14, 0, 0);
        let m = gaussian_matrix(20, 6, &mut rng);
        let svd = truncated_svd(&m, 3).unwrap();
        let dropped = drop_leading_component(&svd).unwrap();
        assert_eq!(dropped.k(), 2);
        assert_eq!(dropped.d, svd.d[1..].to_vec());
        let twice = drop_leading_component(&dropped).unwrap();
        assert_eq!(twice.k(), 1);
        assert_eq!(twice.d, svd.d[2..].to_vec());
        assert!(drop_leading_component(&twice).is_err());
    }

    #[test]
    fn leading_column_captures_offset() {
        // constant offset direction plus small noise
        let mut rng = substream(15, 0, 0);
        let n = 400;
        let d = 16;
        let mut m = gaussian_matrix(n, d, &mut rng) * 0.1;
        for i in 0..n {
            for j in 0..d {
                m[(i, j)] += 1.0;
            }
        }
        let svd = truncated_svd(&m, 3).unwrap();
        let col: Vec<f64> = svd.u.column(0).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(sd / mean.abs() < 0.1);
    }

    #[test]
    fn so1_is_identity() {
        let mut rng = substream(16, 0, 0);
        for _ in 0..10 {
            let r = sample_haar_rotation(1, &mut rng);
            assert_eq!(r.0[(0, 0)], 1.0);
        }
    }

    #[test]
    fn haar_samples_are_rotations() {
        let mut rng = substream(17, 0, 0);
        for k in [2, 3, 5, 10] {
            for _ in 0..20 {
                let r = sample_haar_rotation(k, &mut rng);
                assert!(orthonormality_residual(&r.0) <= 1e-10);
                assert!((r.0.determinant() - 1.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn resample_preserves_row_norms() {
        let mut rng = substream(18, 0, 0);
        let u = gaussian_matrix(30, 4, &mut rng);
        for method in [ResampleMethod::HaarRotation, ResampleMethod::SphereDirection] {
            let out = resample_with(&u, method, &mut rng);
            for i in 0..30 {
                assert!((out.row(i).norm() - u.row(i).norm()).abs() <= 1e-10);
            }
        }
        let single = Matrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let out = rotation_invariant_resample(&single, &mut rng);
        assert!((out.row(0).norm() - 5.0).abs() <= 1e-10);
    }

    #[test]
    fn resample_zero_is_zero() {
        let mut rng = substream(19, 0, 0);
        let u = Matrix::zeros(5, 3);
        for method in [ResampleMethod::HaarRotation, ResampleMethod::SphereDirection] {
            assert_eq!(resample_with(&u, method, &mut rng), u);
        }
    }
}
