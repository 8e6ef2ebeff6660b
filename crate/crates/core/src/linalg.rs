//! Small dense helpers over `nalgebra` complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};

pub type CMatrix = DMatrix<Complex64>;

/// `AᴴA`, accumulated column pair by column pair in a fixed order.
pub fn gram_of_columns(a: &CMatrix) -> CMatrix {
    a.ad_mul(a)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    if h.nrows() != h.ncols() {
        return Err(LabError::Eigen(format!("{}×{} matrix is not square", h.nrows(), h.ncols())));
    }
    if h.nrows() == 0 {
        return Ok(Vec::new());
    }
    // symmetrize to remove rounding asymmetry before the Hermitian solver
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Eigen("non-finite eigenvalue".into()));
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn hermitian_extremes(h: &CMatrix) -> Result<(f64, f64)> {
    let v = hermitian_eigenvalues(h)?;
    match (v.first(), v.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(LabError::Eigen("empty matrix".into())),
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| LabError::Eigen("SVD did not converge".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `max |A_ij − δ_ij|` over the leading `n×n` block.
pub fn identity_deviation(a: &CMatrix, n: usize) -> f64 {
    let n = n.min(a.nrows()).min(a.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `max |A_ij − B_ij|` over the leading `rows×cols` block.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix, rows: usize, cols: usize) -> f64 {
    let rows = rows.min(a.nrows()).min(b.nrows());
    let cols = cols.min(a.ncols()).min(b.ncols());
    let mut worst = 0.0f64;
    for j in 0..cols {
        for i in 0..rows {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
