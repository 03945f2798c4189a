//! Dense symmetric linear algebra kernels used by the fitting code.
//!
//! Matrices stay small (a few hundred columns), so straightforward
//! cache-friendly implementations over `nalgebra` storage are sufficient.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Returns an error naming the pivot if the matrix is not positive definite.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = a.lower_triangle();
    // Column-major left-looking factorization; columns are contiguous.
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            if ljk != 0.0 {
                // l[j.., j] -= ljk * l[j.., k]
                let (col_k, col_j) = {
                    let base = l.as_mut_slice();
                    let (left, right) = base.split_at_mut(j * n);
                    (&left[k * n..k * n + n], &mut right[..n])
                };
                for i in j..n {
                    col_j[i] -= ljk * col_k[i];
                }
            }
        }
        let d = l[(j, j)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::numerical(
                "cholesky",
                format!("non-positive pivot {d:.3e} at column {j}"),
            ));
        }
        let inv = 1.0 / d.sqrt();
        let col_j = &mut l.as_mut_slice()[j * n..(j + 1) * n];
        for v in col_j[j..].iter_mut() {
            *v *= inv;
        }
    }
    Ok(l)
}

/// Solves `L X = B` in place (forward substitution), `L` lower triangular.
pub fn solve_lower_inplace(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let ls = l.as_slice();
    let ncols = b.ncols();
    let bs = b.as_mut_slice();
    for c in 0..ncols {
        let col = &mut bs[c * n..(c + 1) * n];
        for j in 0..n {
            let xj = col[j] / ls[j * n + j];
            col[j] = xj;
            if xj != 0.0 {
                let lcol = &ls[j * n..(j + 1) * n];
                for i in j + 1..n {
                    col[i] -= xj * lcol[i];
                }
            }
        }
    }
}

/// Solves `L^T X = B` in place (backward substitution), `L` lower triangular.
pub fn solve_lower_transpose_inplace(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let ls = l.as_slice();
    let ncols = b.ncols();
    let bs = b.as_mut_slice();
    for c in 0..ncols {
        let col = &mut bs[c * n..(c + 1) * n];
        for j in (0..n).rev() {
            let lcol = &ls[j * n..(j + 1) * n];
            let mut acc = col[j];
            for i in j + 1..n {
                acc -= lcol[i] * col[i];
            }
            col[j] = acc / lcol[j];
        }
    }
}

/// Solves the SPD system `A X = B` given the Cholesky factor of `A`.
pub fn spd_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    solve_lower_inplace(l, &mut x);
    solve_lower_transpose_inplace(l, &mut x);
    x
}

/// Symmetric eigendecomposition `A = Q diag(vals) Q^T`.
pub fn sym_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(a);
    (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
}

/// A square root factor `W` with `W^T W = A` for symmetric PSD `A`,
/// dropping directions with eigenvalues below `tol * max_ev`.
pub fn psd_sqrt(a: DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let max_ev = vals.iter().cloned().fold(0.0f64, f64::max);
    let mut w = DMatrix::zeros(n, n);
    for (k, &ev) in vals.iter().enumerate() {
        if ev > tol * max_ev && ev > 0.0 {
            let s = ev.sqrt();
            for i in 0..n {
                w[(k, i)] = s * vecs[(i, k)];
            }
        }
    }
    w
}

/// Orthonormal basis of the null space `{v : A v = 0}` of a symmetric PSD
/// matrix, using a relative eigenvalue cutoff.
pub fn psd_null_space(a: DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let max_ev = vals.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let null_cols: Vec<usize> = (0..n).filter(|&k| vals[k] <= tol * max_ev).collect();
    let mut z = DMatrix::zeros(n, null_cols.len());
    for (j, &k) in null_cols.iter().enumerate() {
        for i in 0..n {
            z[(i, j)] = vecs[(i, k)];
        }
    }
    z
}

/// Householder-based orthonormal complement of a single vector: returns a
/// `k x (k-1)` matrix `Z` with `c^T Z = 0` and `Z^T Z = I`.
pub fn householder_complement(c: &[f64]) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 0.0, "constraint vector must be non-zero");
    // v = c + sign(c_0) * ||c|| * e_0; H = I - 2 v v^T / (v^T v) maps c to a
    // multiple of e_0, so columns 1..k of H span the complement of c.
    let mut v: Vec<f64> = c.to_vec();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * norm;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut z = DMatrix::zeros(k, k - 1);
    for j in 1..k {
        for i in 0..k {
            let e = if i == j { 1.0 } else { 0.0 };
            z[(i, j - 1)] = e - 2.0 * v[i] * v[j] / vtv;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m.transpose() * m + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(20, &mut rng);
        let l = cholesky(&a).unwrap();
        let diff = (&l * l.transpose() - &a).norm();
        assert!(diff < 1e-10);
    }

    #[test]
    fn solve_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(15, &mut rng);
        let b = DMatrix::from_fn(15, 3, |_, _| rng.gen_range(-1.0..1.0));
        let l = cholesky(&a).unwrap();
        let x = spd_solve(&l, &b);
        assert!((&a * &x - &b).norm() < 1e-9);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn sqrt_factor_reproduces_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(12, &mut rng);
        let w = psd_sqrt(a.clone(), 1e-12);
        assert!((w.transpose() * &w - a).norm() < 1e-8);
    }

    #[test]
    fn householder_complement_is_orthonormal() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let z = householder_complement(&c);
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::identity(3, 3)).norm() < 1e-12);
        let cz = DMatrix::from_row_slice(1, 4, &c) * &z;
        assert!(cz.norm() < 1e-12);
    }
}
