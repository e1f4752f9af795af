//! Small complex linear-algebra helpers shared by every module.
//!
//! Vectors are plain `Vec<C64>`; sparse matrices are faer CSC matrices;
//! dense work uses `faer::Mat`.

use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type SpMat = SparseColMat<usize, C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Builds a CSC matrix from triplets; duplicate entries are summed.
pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[Triplet<usize, usize, C64>]) -> SpMat {
    SparseColMat::try_new_from_triplets(nrows, ncols, triplets)
        .expect("triplet indices are generated in range")
}

/// `y = A x`.
pub fn spmv(a: &SpMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![ZERO; a.nrows()];
    let col_ptr = a.symbolic().col_ptr();
    let row_idx = a.symbolic().row_idx();
    let val = a.val();
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        for p in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[p]] += val[p] * xj;
        }
    }
    y
}

/// `y = A^H x`.
pub fn spmv_adjoint(a: &SpMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.nrows(), x.len());
    let col_ptr = a.symbolic().col_ptr();
    let row_idx = a.symbolic().row_idx();
    let val = a.val();
    (0..a.ncols())
        .map(|j| {
            (col_ptr[j]..col_ptr[j + 1])
                .map(|p| val[p].conj() * x[row_idx[p]])
                .sum()
        })
        .collect()
}

pub fn to_dense(a: &SpMat) -> Mat<C64> {
    let mut d = Mat::<C64>::zeros(a.nrows(), a.ncols());
    let col_ptr = a.symbolic().col_ptr();
    let row_idx = a.symbolic().row_idx();
    let val = a.val();
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            d[(row_idx[p], j)] += val[p];
        }
    }
    d
}

/// Conjugated inner product `x^H y`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `Re(x^H C x)`; the squared norm induced by a Hermitian positive matrix.
pub fn energy_sq(c: &SpMat, x: &[C64]) -> f64 {
    dot(x, &spmv(c, x)).re
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn col_to_vec(m: &Mat<C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn vec_to_col(x: &[C64]) -> Mat<C64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

/// Uniform entries in the unit square of the complex plane, centred at 0.
pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs(a: &Mat<C64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Full spectrum of the Hermitian-definite pencil `(left, right)`.
///
/// Reduces with the Cholesky factor `right = L L^H` to the standard problem
/// `L^{-1} left L^{-H}`. Eigenvalues are returned in descending order and the
/// eigenvectors are `right`-orthonormal.
pub fn hermitian_pencil_eigen(left: &Mat<C64>, right: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = left.nrows();
    assert_eq!((n, n), (right.nrows(), right.ncols()));
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let llt = right
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("right-hand matrix is not positive definite: {e:?}")))?;
    let l = llt.L();

    // H = L^{-1} left L^{-H}
    let mut x = left.to_owned();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut h = x.adjoint().to_owned();
    l.solve_lower_triangular_in_place(h.as_mut());
    // symmetrise against roundoff
    let h = Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);

    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen solver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();

    // faer sorts ascending; flip to descending with a stable order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| s[k].re).collect();
    let mut q = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);

    // back-transform: v = L^{-H} q
    l.adjoint().solve_upper_triangular_in_place(q.as_mut());
    Ok((values, q))
}

/// Largest eigenvalue of the Hermitian-definite pencil `(left, right)`.
pub fn pencil_max_eigenvalue(left: &Mat<C64>, right: &Mat<C64>) -> Result<f64> {
    let n = left.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let llt = right
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("right-hand matrix is not positive definite: {e:?}")))?;
    let l = llt.L();
    let mut x = left.to_owned();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut h = x.adjoint().to_owned();
    l.solve_lower_triangular_in_place(h.as_mut());
    let h = Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let vals = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen solver failed: {e:?}")))?;
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}
