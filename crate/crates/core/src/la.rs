//! Small dense helpers on top of `faer`.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub(crate) fn cplx(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn dagger(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `(M + M†) / 2`.
pub fn hermitian_part(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Largest entry-wise modulus of `M − M†`.
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max(a[(i, j)].norm());
        }
    }
    worst
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Eigenvalues of a Hermitian matrix (the Hermitian part is taken first), ascending.
pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let h = hermitian_part(m);
    h.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
}

/// Trace norm `‖M‖₁` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(hermitian_eigenvalues(m)?.iter().map(|x| x.abs()).sum())
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    Ok(0.5 * trace_norm_hermitian(diff.as_ref())?)
}

/// `U† M U`.
pub(crate) fn similarity_dag(u: MatRef<'_, c64>, m: MatRef<'_, c64>) -> Mat<c64> {
    u.adjoint() * m * u
}

/// `U M U†`.
pub(crate) fn similarity(u: MatRef<'_, c64>, m: MatRef<'_, c64>) -> Mat<c64> {
    u * m * u.adjoint()
}

/// Column-stacking vectorization: entry `(j, k)` lands at `k * n + j`.
pub fn vec_col(m: MatRef<'_, c64>) -> Vec<c64> {
    let n = m.nrows();
    let mut out = vec![ZERO; n * m.ncols()];
    for k in 0..m.ncols() {
        for j in 0..n {
            out[k * n + j] = m[(j, k)];
        }
    }
    out
}

pub fn unvec_col(v: &[c64], n: usize) -> Mat<c64> {
    assert_eq!(v.len(), n * n);
    Mat::from_fn(n, n, |j, k| v[k * n + j])
}

pub(crate) fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
