//! Truncated matrices of `S_β`, `M_f`, `h(S_β)` and `T_{α,β}` in the
//! orthonormal base `{z^k/β_k}`.
//!
//! Raw Taylor coordinates relate to these by `u_k = β_k f̂(k)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blaschke::BlaschkeProduct;
use crate::error::{LabError, Result};
use crate::linalg::{identity_deviation, CMatrix};
use crate::series::PowerSeries;
use crate::weights::WeightSequence;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorRole {
    Shift,
    Mult,
    Calculus,
    Transport,
    Deformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub role: OperatorRole,
    pub weights: String,
}

impl OperatorMatrix {
    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    /// The same operator in raw Taylor coordinates, `D⁻¹ A D` with `D = diag(β)`.
    pub fn to_raw(&self, w: &WeightSequence) -> Result<CMatrix> {
        to_raw(&self.entries, w)
    }
}

/// `D_β⁻¹ A D_β` for a matrix in orthonormal coordinates of `H²_β`.
pub fn to_raw(a: &CMatrix, w: &WeightSequence) -> Result<CMatrix> {
    let n = a.nrows().max(a.ncols());
    let b = w.betas(n)?;
    Ok(CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (b[j] / b[i])))
}

fn series_coeff(f: &PowerSeries, k: usize) -> Result<C> {
    f.coeff(k).ok_or_else(|| {
        LabError::TruncationOverflow(format!("series of order {} read at index {k}", f.order()))
    })
}

/// `[S]_{k−1,k} = β_{k−1}/β_k`.
pub fn shift_matrix(w: &WeightSequence, k: usize) -> Result<OperatorMatrix> {
    assert!(k >= 2, "shift needs K ≥ 2");
    let b = w.betas(k)?;
    let mut m = DMatrix::zeros(k, k);
    for i in 1..k {
        m[(i - 1, i)] = C::new(b[i - 1] / b[i], 0.0);
    }
    Ok(OperatorMatrix {
        entries: m,
        role: OperatorRole::Shift,
        weights: w.id(),
    })
}

/// `[M_f]_{ij} = f̂(i−j) β_i/β_j`, `rows × cols`.
pub fn mult_matrix_rect(f: &PowerSeries, w: &WeightSequence, rows: usize, cols: usize) -> Result<OperatorMatrix> {
    let b = w.betas(rows.max(cols))?;
    let coeffs: Vec<C> = (0..rows).map(|d| f.coeff(d).unwrap_or(C::new(0.0, 0.0))).collect();
    if rows > 0 && !f.is_exact() && f.order() + 1 < rows {
        series_coeff(f, rows - 1)?;
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| {
        if i >= j {
            coeffs[i - j] * (b[i] / b[j])
        } else {
            C::new(0.0, 0.0)
        }
    });
    Ok(OperatorMatrix {
        entries: m,
        role: OperatorRole::Mult,
        weights: w.id(),
    })
}

pub fn mult_matrix(f: &PowerSeries, w: &WeightSequence, k: usize) -> Result<OperatorMatrix> {
    mult_matrix_rect(f, w, k, k)
}

/// `[h(S_β)]_{j,j+i} = ĥ(i) β_j/β_{j+i}`, `rows × cols`.
pub fn calculus_matrix_rect(h: &PowerSeries, w: &WeightSequence, rows: usize, cols: usize) -> Result<OperatorMatrix> {
    let b = w.betas(rows.max(cols))?;
    if cols > 0 && !h.is_exact() && h.order() + 1 < cols {
        series_coeff(h, cols - 1)?;
    }
    let coeffs: Vec<C> = (0..cols).map(|d| h.coeff(d).unwrap_or(C::new(0.0, 0.0))).collect();
    let m = DMatrix::from_fn(rows, cols, |i, j| {
        if j >= i {
            coeffs[j - i] * (b[i] / b[j])
        } else {
            C::new(0.0, 0.0)
        }
    });
    Ok(OperatorMatrix {
        entries: m,
        role: OperatorRole::Calculus,
        weights: w.id(),
    })
}

pub fn calculus_matrix(h: &PowerSeries, w: &WeightSequence, k: usize) -> Result<OperatorMatrix> {
    calculus_matrix_rect(h, w, k, k)
}

/// `T_{α,β}` in orthonormal coordinates: the identity. Its raw form is
/// [`transport_raw`].
pub fn transport_matrix(wa: &WeightSequence, wb: &WeightSequence, k: usize) -> Result<OperatorMatrix> {
    wa.extend_to(k)?;
    wb.extend_to(k)?;
    Ok(OperatorMatrix {
        entries: DMatrix::identity(k, k),
        role: OperatorRole::Transport,
        weights: format!("{wa}->{wb}"),
    })
}

/// `T_{α,β}` on raw Taylor coefficients: `f̂(k) ↦ (α_k/β_k) f̂(k)`.
pub fn transport_raw(wa: &WeightSequence, wb: &WeightSequence, k: usize) -> Result<CMatrix> {
    let a = wa.betas(k)?;
    let b = wb.betas(k)?;
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { C::new(a[i] / b[i], 0.0) } else { C::new(0.0, 0.0) }))
}

/// Backward shift on raw coefficients, `[S]_{k−1,k} = 1`.
pub fn raw_backward_shift(k: usize) -> CMatrix {
    DMatrix::from_fn(k, k, |i, j| if j == i + 1 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
}

/// Both sides of `T_{β,β⁻¹} S_β T_{β⁻¹,β} = M_z*` (adjoint on `H²_{β⁻¹}`), in
/// raw coordinates.
#[derive(Debug, Clone)]
pub struct CommutantTransport {
    pub transported_shift: CMatrix,
    pub dual_adjoint: CMatrix,
    pub max_deviation: f64,
}

pub fn commutant_transport_check(w: &WeightSequence, k: usize) -> Result<CommutantTransport> {
    let dual = w.dual();
    let left = transport_raw(w, &dual, k)? * raw_backward_shift(k) * transport_raw(&dual, w, k)?;
    let z = PowerSeries::monomial(1, 1);
    let mz = mult_matrix(&z, &dual, k)?;
    let right = to_raw(&mz.entries.adjoint(), &dual)?;
    let max_deviation = crate::linalg::max_abs_diff(&left, &right, k, k);
    Ok(CommutantTransport {
        transported_shift: left,
        dual_adjoint: right,
        max_deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftInverseReport {
    pub k: usize,
    pub order: usize,
    /// Leading block `K − 4·order` that is checked.
    pub block: usize,
    /// Inner dimension of the product; `K + pad` with `pad = K`.
    pub inner_dim: usize,
    /// `max |[B*(S)B(M_z)]_{ij} − δ_ij|` on the block, inner dimension extended.
    pub deviation: f64,
    /// The same with square `K×K` truncations of both factors.
    pub square_deviation: f64,
    /// Largest leading block on which the square product deviates by < 1e-10.
    pub square_exact_block: usize,
}

/// Compression `P_K B*(S_β) B(M_z) P_K` against the identity.
///
/// The product is formed with the inner index running to `2K`, so the only
/// error left is the Taylor tail of `B` and `B*` beyond that index. Square
/// truncations of the two factors are reported as well; they lose accuracy
/// near the lower-right corner.
pub fn left_inverse_check(b: &BlaschkeProduct, w: &WeightSequence, k: usize) -> Result<LeftInverseReport> {
    let order = b.order();
    assert!(k > 4 * order, "need K > 4·order");
    let inner_dim = 2 * k;
    let bs = b.star().taylor(inner_dim);
    let bt = b.taylor(inner_dim);
    let upper = calculus_matrix_rect(&bs, w, k, inner_dim)?;
    let lower = mult_matrix_rect(&bt, w, inner_dim, k)?;
    let prod = &upper.entries * &lower.entries;
    let block = k - 4 * order;
    let deviation = identity_deviation(&prod, block);

    let sq = calculus_matrix(&bs, w, k)?.entries * mult_matrix(&bt, w, k)?.entries;
    let square_deviation = identity_deviation(&sq, block);
    let mut square_exact_block = 0;
    for n in 1..=k {
        if identity_deviation(&sq, n) < 1e-10 {
            square_exact_block = n;
        } else {
            break;
        }
    }
    Ok(LeftInverseReport {
        k,
        order,
        block,
        inner_dim,
        deviation,
        square_deviation,
        square_exact_block,
    })
}
