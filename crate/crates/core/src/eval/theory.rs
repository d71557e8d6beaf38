//! Fixed-dictionary reconstruction and its misalignment lower bound.
//!
//! If `A = Z*·C*ᵀ` and a method may only use the columns of a fixed
//! dictionary `C_W`, then for every `Z`
//! `‖A − Z·C_Wᵀ‖_F ≥ σ_k(Z*) · ‖(I − Π)·C*‖_F`, where `Π` projects onto the
//! column space of `C_W` and `σ_k` is the smallest singular value of the
//! n×k matrix `Z*`.

use rand::Rng;

use crate::linalg::{frobenius, gaussian_matrix, haar_stiefel, Matrix};
use crate::{Error, Result};

/// Orthonormal basis of the column space of `c`, dropping directions with
/// singular value below `max(rows, cols)·ε·σ_max`.
pub fn column_space_basis(c: &Matrix) -> Result<Matrix> {
    let svd = c.clone().svd(true, false);
    let u = svd.u.ok_or(Error::SvdNonConvergence)?;
    let smax = svd.singular_values.max();
    let cutoff = smax * c.nrows().max(c.ncols()) as f64 * f64::EPSILON;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    Ok(u.select_columns(keep.iter()))
}

/// Least-squares fit `min_Z ‖A − Z·C_Wᵀ‖_F`.
///
/// `A` is n×d, `C_W` is d×m. Returns the residual norm and the minimizer
/// `Z = A·(C_Wᵀ)⁺` (n×m), computed through the SVD of `C_W` so rank-deficient
/// dictionaries are handled.
pub fn fixed_dictionary_fit(a: &Matrix, c_w: &Matrix) -> Result<(f64, Matrix)> {
    if c_w.ncols() == 0 || c_w.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "dictionary is {}x{} but data has width {}",
            c_w.nrows(),
            c_w.ncols(),
            a.ncols()
        )));
    }
    let svd = c_w.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SvdNonConvergence),
    };
    let s = &svd.singular_values;
    let cutoff = s.max() * c_w.nrows().max(c_w.ncols()) as f64 * f64::EPSILON;
    // (C_Wᵀ)⁺ = U·S⁺·Vᵀ
    let mut u_scaled = u.clone();
    for (j, &sj) in s.iter().enumerate() {
        let inv = if sj > cutoff { 1.0 / sj } else { 0.0 };
        u_scaled.column_mut(j).scale_mut(inv);
    }
    let z = a * (u_scaled * v_t);
    let residual = frobenius(&(a - &z * c_w.transpose()));
    Ok((residual, z))
}

/// `‖(I − Π_{C_W})·C*‖_F`, the distance from the true concepts to the span of
/// the fixed dictionary.
pub fn misalignment(c_w: &Matrix, c_star: &Matrix) -> Result<f64> {
    if c_w.nrows() != c_star.nrows() {
        return Err(Error::Dimension("dictionaries must share the ambient dimension".into()));
    }
    let q = column_space_basis(c_w)?;
    let projected = &q * (q.transpose() * c_star);
    Ok(frobenius(&(c_star - projected)))
}

/// Smallest of the `min(n, k)` singular values of `z`.
pub fn sigma_min(z: &Matrix) -> f64 {
    z.singular_values().min()
}

/// A misspecified-dictionary instance: `A = Z*·C*ᵀ` with a fixed dictionary
/// `C_W` whose columns span only an `r`-dimensional subspace.
#[derive(Debug, Clone)]
pub struct DictionaryInstance {
    pub a: Matrix,
    pub z_star: Matrix,
    pub c_star: Matrix,
    pub c_w: Matrix,
}

impl DictionaryInstance {
    /// Returns `(residual, σ_k(Z*)·δ)`.
    pub fn residual_and_bound(&self) -> Result<(f64, f64)> {
        let (residual, _) = fixed_dictionary_fit(&self.a, &self.c_w)?;
        Ok((residual, sigma_min(&self.z_star) * misalignment(&self.c_w, &self.c_star)?))
    }
}

/// Draw an instance with `n` samples, ambient dimension `d`, `k` true
/// concepts and `m` dictionary atoms confined to a random `r`-dimensional
/// subspace (`r < d`, so the true concepts are generically outside it).
pub fn dictionary_instance<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    k: usize,
    m: usize,
    r: usize,
    rng: &mut R,
) -> Result<DictionaryInstance> {
    if k == 0 || m == 0 || r == 0 || r > d || k > d {
        return Err(Error::InvalidArgument(format!(
            "invalid instance sizes n={n} d={d} k={k} m={m} r={r}"
        )));
    }
    let z_star = gaussian_matrix(n, k, rng);
    let c_star = haar_stiefel(d, k, rng);
    let basis = haar_stiefel(d, r, rng);
    let c_w = basis * gaussian_matrix(r, m, rng);
    Ok(DictionaryInstance {
        a: &z_star * c_star.transpose(),
        z_star,
        c_star,
        c_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn containment_gives_zero_residual() {
        let mut rng = substream(80, 0, 0);
        let c = haar_stiefel(10, 3, &mut rng);
        let a = gaussian_matrix(20, 3, &mut rng) * c.transpose();
        let (res, z) = fixed_dictionary_fit(&a, &c).unwrap();
        assert!(res <= 1e-8);
        assert_eq!(z.shape(), (20, 3));
    }

    #[test]
    fn orthogonal_dictionary_gives_full_residual() {
        let a = Matrix::from_fn(5, 4, |i, j| if j < 2 { (i + j) as f64 + 1.0 } else { 0.0 });
        let c = Matrix::from_fn(4, 2, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
        let (res, _) = fixed_dictionary_fit(&a, &c).unwrap();
        assert!((res - frobenius(&a)).abs() < 1e-12);
    }

    #[test]
    fn reparameterization_invariance() {
        let mut rng = substream(81, 0, 0);
        let a = gaussian_matrix(15, 8, &mut rng);
        let c = gaussian_matrix(8, 3, &mut rng);
        let g = gaussian_matrix(3, 3, &mut rng);
        let (r1, _) = fixed_dictionary_fit(&a, &c).unwrap();
        let (r2, _) = fixed_dictionary_fit(&a, &(&c * g)).unwrap();
        assert!((r1 - r2).abs() <= 1e-9 * r1);
    }

    #[test]
    fn rank_deficient_dictionary() {
        let mut rng = substream(82, 0, 0);
        let inst = dictionary_instance(50, 12, 3, 20, 6, &mut rng).unwrap();
        let (res, bound) = inst.residual_and_bound().unwrap();
        assert!(bound > 0.0);
        assert!(res >= bound - 1e-8, "{res} < {bound}");
    }

    #[test]
    fn bound_is_tight_for_orthonormal_loadings() {
        // With orthonormal Z* every singular value is 1, so the bound is exact.
        let mut rng = substream(83, 0, 0);
        let z = haar_stiefel(30, 2, &mut rng);
        let c_star = haar_stiefel(6, 2, &mut rng);
        let c_w = haar_stiefel(6, 3, &mut rng);
        let a = &z * c_star.transpose();
        let (res, _) = fixed_dictionary_fit(&a, &c_w).unwrap();
        let bound = sigma_min(&z) * misalignment(&c_w, &c_star).unwrap();
        assert!((res - bound).abs() < 1e-10);
    }
}
