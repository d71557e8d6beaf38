//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for x in m.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    m
}

/// max |XᵀX − I| over all entries.
pub fn orthonormality_residual(x: &Matrix) -> f64 {
    let g = x.tr_mul(x);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthogonal polar factor of a square matrix: `P Qᵀ` where `X = P Σ Qᵀ`.
pub fn polar_factor(x: &Matrix) -> Option<Matrix> {
    let svd = x.clone().try_svd(true, true, f64::EPSILON, 0)?;
    let u = svd.u?;
    let v_t = svd.v_t?;
    Some(u * v_t)
}

/// Orthonormal basis (n×k) whose distribution is Haar on the Stiefel
/// manifold: sign-corrected thin QR of an n×k Gaussian matrix.
pub fn haar_stiefel<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Matrix {
    let g = gaussian_matrix(n, k, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn frobenius(x: &Matrix) -> f64 {
    x.norm()
}

/// Pearson correlation of two equal-length slices; 0 when either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

pub fn row_vec(m: &Matrix, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Best matching between the columns of `a` and `b` under signed
/// permutations, maximizing the total |correlation|. Returns the mean
/// |correlation| of the matched pairs and the matching (column of `b` for
/// each column of `a`). Exhaustive over permutations for k ≤ 8, greedy
/// beyond that.
pub fn signed_permutation_alignment(a: &Matrix, b: &Matrix) -> (f64, Vec<usize>) {
    assert_eq!(a.ncols(), b.ncols());
    let k = a.ncols();
    let cols_a: Vec<Vec<f64>> = (0..k).map(|j| a.column(j).iter().copied().collect()).collect();
    let cols_b: Vec<Vec<f64>> = (0..k).map(|j| b.column(j).iter().copied().collect()).collect();
    let mut c = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            c[i][j] = correlation(&cols_a[i], &cols_b[j]).abs();
        }
    }
    let assignment = if k <= 8 {
        best_permutation(&c)
    } else {
        greedy_assignment(&c)
    };
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
    (total / k as f64, assignment)
}

fn best_permutation(c: &[Vec<f64>]) -> Vec<usize> {
    let k = c.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_score = f64::NEG_INFINITY;
    permute(&mut perm, 0, c, &mut best, &mut best_score);
    best
}

fn permute(perm: &mut Vec<usize>, start: usize, c: &[Vec<f64>], best: &mut Vec<usize>, best_score: &mut f64) {
    if start == perm.len() {
        let s: f64 = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        if s > *best_score {
            *best_score = s;
            best.clone_from(perm);
        }
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, c, best, best_score);
        perm.swap(start, i);
    }
}

fn greedy_assignment(c: &[Vec<f64>]) -> Vec<usize> {
    let k = c.len();
    let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(x, y)| c[x][y].total_cmp(&c[a][b]).then((a, b).cmp(&(x, y))));
    let mut out = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    out
}

/// Map `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always follows the index.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
