//! Frames `{B^n/(1 − z̄_j z)}` for a finite Blaschke product, their Gram
//! matrices and Riesz bounds, numerical dual systems, and the identity checks
//! built on them.
//!
//! Columns are indexed by `(j, n)` and stored at position `n·m + j`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::{critical_points, BlaschkeProduct, MoebiusTransform, CLUSTER_TOL};
use crate::error::{fmt_c, LabError, Result};
use crate::linalg::{self, CMatrix};
use crate::series::{divide_by_one_minus, FunctionSpec, PowerSeries};
use crate::weights::WeightSequence;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `B^n/(1 − z̄_j z)`
    Raw,
    /// divided by `β_n`
    Beta,
    /// multiplied by `β_n`
    InverseBeta,
}

/// Möbius maps with `B̃ = post∘B∘pre` and `B̃(0) = 0`, used when the input
/// product does not vanish at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjugation {
    pub omega0: C,
    pub pre: MoebiusTransform,
    pub post: MoebiusTransform,
    pub original: BlaschkeProduct,
}

#[derive(Debug, Clone)]
pub struct FrameMatrix {
    /// Raw Taylor coefficients of every column on `2K` rows.
    coeffs: CMatrix,
    pub blaschke: BlaschkeProduct,
    pub weights: WeightSequence,
    pub n_max: usize,
    pub k: usize,
    pub normalization: Normalization,
    pub conjugation: Option<Conjugation>,
}

fn distinct_check(zeros: &[C]) -> Result<()> {
    for (i, a) in zeros.iter().enumerate() {
        for b in &zeros[i + 1..] {
            if (a - b).norm() < CLUSTER_TOL {
                return Err(LabError::RepeatedZeros {
                    a: fmt_c(*a),
                    b: fmt_c(*b),
                });
            }
        }
    }
    Ok(())
}

/// Bring `B` to a product vanishing at 0 with distinct zeros.
pub(crate) fn normalize(b: &BlaschkeProduct) -> Result<(BlaschkeProduct, Option<Conjugation>)> {
    if b.order() == 1 || b.zeros().iter().any(|z| z.norm() < 1e-15) {
        return Ok((b.clone(), None));
    }
    let branch: Vec<C> = critical_points(&FunctionSpec::Blaschke(b.clone()))?
        .iter()
        .map(|c| c.value)
        .collect();
    let clear = |w: C| branch.iter().all(|v| (v - w).norm() > 1e-3);
    let b0 = b.eval(C::new(0.0, 0.0));
    let (omega0, pre) = if clear(b0) {
        (b0, None)
    } else {
        let omega0 = [1e-2, 3e-2, 1e-1, 3e-1]
            .iter()
            .flat_map(|s| (0..16).map(move |k| b0 + C::from_polar(s * (1.0 - b0.norm()), 0.4 * k as f64)))
            .find(|&w| clear(w))
            .ok_or_else(|| LabError::Degenerate("no admissible base value near B(0)".into()))?;
        let p = b.preimages(omega0)?[0];
        (omega0, Some(MoebiusTransform::involution(p)?))
    };
    let post = MoebiusTransform::involution(omega0)?;
    let inner = match &pre {
        Some(psi) => b.compose(psi.as_blaschke())?,
        None => b.clone(),
    };
    let mut normalized = post.as_blaschke().compose(&inner)?;
    // snap the zero at the origin
    let zeros: Vec<C> = normalized
        .zeros()
        .iter()
        .map(|&z| if z.norm() < 1e-12 { ZERO } else { z })
        .collect();
    normalized = BlaschkeProduct::new(zeros, normalized.theta())?;
    let pre = pre.unwrap_or_else(|| MoebiusTransform::from_blaschke(BlaschkeProduct::identity()).unwrap());
    Ok((
        normalized,
        Some(Conjugation {
            omega0,
            pre,
            post,
            original: b.clone(),
        }),
    ))
}

/// Raw coefficients (length `rows`) of `B^n/(1 − z̄_j z)` for `n ≤ n_max`,
/// one chain per zero.
fn frame_columns(b: &BlaschkeProduct, n_max: usize, rows: usize) -> Vec<Vec<Vec<C>>> {
    b.zeros()
        .par_iter()
        .map(|&zj| {
            let mut col = vec![ZERO; rows];
            let mut p = zj.conj();
            col[0] = C::new(1.0, 0.0);
            for c in col.iter_mut().skip(1) {
                *c = p;
                p *= zj.conj();
            }
            let mut chain = Vec::with_capacity(n_max + 1);
            chain.push(col.clone());
            let phase = b.phase();
            for _ in 0..n_max {
                for &a in b.zeros() {
                    mul_factor_in_place(&mut col, a);
                }
                for c in col.iter_mut() {
                    *c *= phase;
                }
                chain.push(col.clone());
            }
            chain
        })
        .collect()
}

/// `g ← g·(a − z)/(1 − ā z)` on a truncated coefficient vector.
pub(crate) fn mul_factor_in_place(g: &mut [C], a: C) {
    let mut prev = ZERO;
    for c in g.iter_mut() {
        let cur = *c;
        *c = a * cur - prev;
        prev = cur;
    }
    divide_by_one_minus(g, a.conj());
}

/// Frame `{B^n/(1 − z̄_j z)}`, `β`-normalized, on `K` rows.
///
/// Products not vanishing at 0 (order ≥ 2) are first conjugated by Möbius
/// maps; the conjugators are kept in [`FrameMatrix::conjugation`].
pub fn build_frame(b: &BlaschkeProduct, w: &WeightSequence, n_max: usize, k: usize) -> Result<FrameMatrix> {
    distinct_check(b.zeros())?;
    let (nb, conjugation) = normalize(b)?;
    distinct_check(nb.zeros())?;
    let m = nb.order();
    if n_max * m > k / 2 + m {
        return Err(LabError::TruncationOverflow(format!(
            "n_max·m = {} exceeds K/2 = {}",
            n_max * m,
            k / 2
        )));
    }
    w.extend_to(2 * k)?;
    let rows = 2 * k;
    let chains = frame_columns(&nb, n_max, rows);
    let cols = m * (n_max + 1);
    let mut coeffs = CMatrix::zeros(rows, cols);
    for (j, chain) in chains.iter().enumerate() {
        for (n, col) in chain.iter().enumerate() {
            coeffs.set_column(n * m + j, &nalgebra::DVector::from_column_slice(col));
        }
    }
    Ok(FrameMatrix {
        coeffs,
        blaschke: nb,
        weights: w.clone(),
        n_max,
        k,
        normalization: Normalization::Beta,
        conjugation,
    })
}

impl FrameMatrix {
    pub fn m(&self) -> usize {
        self.blaschke.order()
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = n;
        self
    }

    fn column_scale(&self, n: usize, norm: Normalization, b: &[f64]) -> f64 {
        match norm {
            Normalization::Raw => 1.0,
            Normalization::Beta => 1.0 / b[n],
            Normalization::InverseBeta => b[n],
        }
    }

    /// Orthonormal coordinates in `space` of the columns under `norm`, rows `lo..hi`.
    fn coordinates(&self, space: &WeightSequence, norm: Normalization, lo: usize, hi: usize) -> Result<CMatrix> {
        let rb = space.betas(hi)?;
        let cb = self.weights.betas(self.n_max + 1)?;
        let m = self.m();
        Ok(CMatrix::from_fn(hi - lo, self.coeffs.ncols(), |i, c| {
            let n = c / m;
            self.coeffs[(lo + i, c)] * (rb[lo + i] * self.column_scale(n, norm, &cb))
        }))
    }

    /// Coefficient matrix in the orthonormal base of `H²_β`, `K` rows.
    pub fn matrix(&self) -> Result<CMatrix> {
        self.coordinates(&self.weights, self.normalization, 0, self.k)
    }

    /// Coefficient matrix in the orthonormal base of another space.
    pub fn matrix_in(&self, space: &WeightSequence) -> Result<CMatrix> {
        self.coordinates(space, self.normalization, 0, self.k)
    }

    /// Largest column norm carried by rows `K..2K`, relative to the column norm.
    pub fn tail(&self) -> Result<f64> {
        let head = self.coordinates(&self.weights, self.normalization, 0, self.k)?;
        let tail = self.coordinates(&self.weights, self.normalization, self.k, 2 * self.k)?;
        Ok((0..head.ncols())
            .map(|c| tail.column(c).norm() / head.column(c).norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max))
    }

    /// Raw Taylor coefficients of column `(j, n)`, `K` entries.
    pub fn raw_column(&self, j: usize, n: usize) -> Vec<C> {
        let c = n * self.m() + j;
        (0..self.k).map(|i| self.coeffs[(i, c)]).collect()
    }
}

/// `AᴴA` for the frame's normalization.
pub fn gram(f: &FrameMatrix) -> Result<CMatrix> {
    Ok(linalg::gram_of_columns(&f.matrix()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_max: usize,
    pub c1: f64,
    pub c2: f64,
    pub rel_change_c1: f64,
    pub rel_change_c2: f64,
    /// `c1` at `(K/2, n_max/2)`.
    pub c1_half: f64,
    /// Aitken limit of `c1` over the three levels, when the differences contract.
    pub c1_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszReport {
    pub c1: f64,
    pub c2: f64,
    pub cond: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_max: usize,
    pub tail: f64,
    pub stability: Option<Stability>,
    pub verdict: String,
}

/// Extremal eigenvalues of the Gram matrix of the truncated frame.
pub fn gram_bounds(f: &FrameMatrix) -> Result<(f64, f64, f64)> {
    let g = gram(f)?;
    let (c1, c2) = linalg::hermitian_extremes(&g)?;
    Ok((c1.max(0.0), c2, f.tail()?))
}

/// Riesz bounds at `(K, n_max)` with a stability check at `(2K, 2n_max)`.
pub fn riesz_bounds(f: &FrameMatrix) -> Result<RieszReport> {
    riesz_bounds_with_tol(f, 1e-2)
}

/// `c1` of a finite section decreases towards the lower Riesz bound, often at
/// rate `O(1/n_max)`. The frame counts as Riesz-consistent when `c2` is stable
/// within `tol` and `c1` is either stable within `tol` or decreasing with
/// contracting differences towards a positive Aitken limit.
pub fn riesz_bounds_with_tol(f: &FrameMatrix, tol: f64) -> Result<RieszReport> {
    let (c1, c2, tail) = gram_bounds(f)?;
    let original = f.conjugation.as_ref().map_or(&f.blaschke, |c| &c.original);
    let doubled = build_frame(original, &f.weights, 2 * f.n_max, 2 * f.k)?.with_normalization(f.normalization);
    let (d1, d2, _) = gram_bounds(&doubled)?;
    let c1_half = if f.n_max >= 2 {
        let half = build_frame(original, &f.weights, f.n_max / 2, f.k / 2)?.with_normalization(f.normalization);
        gram_bounds(&half)?.0
    } else {
        c1
    };
    let (e1, e2) = (c1_half - c1, c1 - d1);
    let c1_limit = (e1 > 0.0 && e2 >= 0.0 && e2 <= 0.75 * e1).then(|| d1 - e2 * e2 / (e1 - e2));
    let stability = Stability {
        k: doubled.k,
        n_max: doubled.n_max,
        c1: d1,
        c2: d2,
        rel_change_c1: (d1 - c1).abs() / c1.max(f64::MIN_POSITIVE),
        rel_change_c2: (d2 - c2).abs() / c2.max(f64::MIN_POSITIVE),
        c1_half,
        c1_limit,
    };
    let c1_ok = stability.rel_change_c1 < tol || c1_limit.is_some_and(|l| l > 0.5 * d1);
    let stable = stability.rel_change_c2 < tol && c1_ok && c1 > 1e-12 * c2;
    Ok(RieszReport {
        c1,
        c2,
        cond: (c2 / c1).sqrt(),
        k: f.k,
        n_max: f.n_max,
        tail,
        stability: Some(stability),
        verdict: if stable { "Riesz-consistent" } else { "degenerating" }.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct DualFrame {
    pub y: CMatrix,
    /// `max |YᴴA − I|`
    pub residual: f64,
}

/// `Y = A(AᴴA)⁻¹`, so that `YᴴA = I` at truncation.
pub fn dual_frame(f: &FrameMatrix) -> Result<DualFrame> {
    let a = f.matrix()?;
    let g = linalg::gram_of_columns(&a);
    let (lo, hi) = linalg::hermitian_extremes(&g)?;
    if lo <= 1e-13 * hi {
        return Err(LabError::Singular { min_singular: lo.max(0.0).sqrt() });
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or(LabError::Singular { min_singular: lo.max(0.0).sqrt() })?;
    let ginv = chol.inverse();
    let y = &a * &ginv;
    let check = y.ad_mul(&a);
    let residual = linalg::identity_deviation(&check, check.nrows());
    Ok(DualFrame { y, residual })
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub a: CMatrix,
    pub inverse: CMatrix,
    pub min_singular: f64,
    pub cond: f64,
}

/// `A_ij = 1/(1 − z̄_i z_j)` and its inverse.
pub fn kernel_matrix(points: &[C]) -> Result<KernelMatrix> {
    if let Some(z) = points.iter().find(|z| z.norm() >= 1.0) {
        return Err(LabError::ZeroOutsideDisk(fmt_c(*z)));
    }
    distinct_check(points)?;
    let m = points.len();
    let a = CMatrix::from_fn(m, m, |i, j| 1.0 / (1.0 - points[i].conj() * points[j]));
    let s = linalg::singular_values(&a)?;
    let (max_s, min_s) = (s[0], *s.last().unwrap());
    if min_s <= 1e-14 * max_s {
        return Err(LabError::Singular { min_singular: min_s });
    }
    let inverse = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(LabError::Singular { min_singular: min_s })?;
    Ok(KernelMatrix {
        a,
        inverse,
        min_singular: min_s,
        cond: max_s / min_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub k: usize,
    pub n_max: usize,
    /// Columns/rows compared.
    pub block: usize,
    pub max_deviation: f64,
    /// Measured scalar `c` in `LHS ≈ c·I`, when applicable.
    pub scale: Option<f64>,
}

/// Compare `Gram_{β̃}{B^{n+1}/β̃_n}` with `Gram_β{D D_w M_{B'}(B^n/β_n)}`,
/// `β̃_n = (n+1)β_n`.
pub fn cpb_check(b: &BlaschkeProduct, w: &WeightSequence, n_max: usize, k: usize) -> Result<IdentityReport> {
    distinct_check(b.zeros())?;
    if !b.zeros().iter().any(|z| z.norm() < 1e-15) {
        return Err(LabError::Domain("the identity needs B(0) = 0".into()));
    }
    let beta = w.betas(k + 1)?;
    let wk: Vec<f64> = (1..=k).map(|i| w.w(i)).collect::<Result<_>>()?;

    // left: powers B^{n+1} weighted by β̃
    let mut left = CMatrix::zeros(k, n_max + 1);
    let mut p = b.taylor(k).into_coeffs();
    let mut powers = Vec::with_capacity(n_max + 2);
    powers.push({
        let mut one = vec![ZERO; k + 1];
        one[0] = C::new(1.0, 0.0);
        one
    });
    for n in 0..=n_max {
        powers.push(p.clone());
        let scale = 1.0 / ((n as f64 + 1.0) * beta[n]);
        for i in 0..k {
            left[(i, n)] = p[i] * ((i as f64 + 1.0) * beta[i] * scale);
        }
        for &a in b.zeros() {
            mul_factor_in_place(&mut p, a);
        }
        for c in p.iter_mut() {
            *c *= b.phase();
        }
    }

    // right: D D_w (B' · B^n)/β_n in the β-orthonormal base
    let db = crate::series::derivative(&b.taylor(k));
    let mut right = CMatrix::zeros(k, n_max + 1);
    for n in 0..=n_max {
        let bn = PowerSeries::new(powers[n][..k].to_vec());
        let prod = crate::series::multiply(&bn, &db);
        for i in 0..k {
            let d = (i as f64 + 2.0) / (i as f64 + 1.0);
            right[(i, n)] = prod.coeffs()[i] * (d * wk[i] * beta[i] / beta[n]);
        }
    }
    let gl = linalg::gram_of_columns(&left);
    let gr = linalg::gram_of_columns(&right);
    let block = n_max + 1;
    Ok(IdentityReport {
        k,
        n_max,
        block,
        max_deviation: linalg::max_abs_diff(&gl, &gr, block, block),
        scale: None,
    })
}

/// `A*_{𝔉_{β⁻¹}} A_{𝔉_β}` for the Möbius frame `𝔉 = {φ^n/(1 − z̄₀z)}`,
/// compared with `c·I`, `c = 1/(1 − |z₀|²)`.
pub fn moebius_duality_check(z0: C, w: &WeightSequence, n_max: usize, k: usize) -> Result<IdentityReport> {
    let phi = BlaschkeProduct::new(vec![z0], 0.0)?;
    let frame = build_frame(&phi, w, n_max, k)?;
    let dual = w.dual();
    let a_beta = frame.coordinates(w, Normalization::Beta, 0, k)?;
    let a_inv = frame.coordinates(&dual, Normalization::InverseBeta, 0, k)?;
    let prod = a_inv.ad_mul(&a_beta);
    let expected = 1.0 / (1.0 - z0.norm_sqr());
    let scaled = &prod * C::new(1.0 / expected, 0.0);
    let measured = (0..prod.nrows()).map(|i| prod[(i, i)].re).sum::<f64>() / prod.nrows() as f64;
    Ok(IdentityReport {
        k,
        n_max,
        block: n_max + 1,
        max_deviation: linalg::identity_deviation(&scaled, n_max + 1) * expected,
        scale: Some(measured),
    })
}

/// Raw Taylor coefficients of `φ_{z₀}^n` for `n = 0..=n_max` on `rows` rows,
/// passed one at a time to `visit`.
fn for_each_moebius_power(z0: C, n_max: usize, rows: usize, mut visit: impl FnMut(usize, &[C]) -> bool) {
    let mut p = vec![ZERO; rows];
    p[0] = C::new(1.0, 0.0);
    for n in 0..=n_max {
        if !visit(n, &p) {
            return;
        }
        mul_factor_in_place(&mut p, z0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNormProfile {
    pub z0: C,
    pub weights: String,
    /// `r_n = ‖φ^n‖_β/β_n`, `n = 0..=n_max`
    pub r: Vec<f64>,
    /// Rows used.
    pub k: usize,
    /// Largest relative tail norm over all `n`.
    pub tail: f64,
}

/// `r_n = ‖φ_{z₀}^n‖_{H²_β}/β_n`.
///
/// The row count starts at `⌈(1+|z₀|)/(1−|z₀|)·n_max⌉ + 64` and doubles until
/// the mass in the last 64 rows is below `1e-6` of the norm for every `n`.
pub fn column_norm_profile(z0: C, w: &WeightSequence, n_max: usize) -> Result<ColumnNormProfile> {
    let t = z0.norm();
    if t >= 1.0 {
        return Err(LabError::ZeroOutsideDisk(fmt_c(z0)));
    }
    let mut rows = ((1.0 + t) / (1.0 - t) * n_max as f64).ceil() as usize + 64;
    let budget = 1 << 22;
    loop {
        if rows > budget {
            return Err(LabError::TruncationOverflow(format!("profile needs more than {budget} rows")));
        }
        let beta = w.betas(rows)?;
        let mut r = Vec::with_capacity(n_max + 1);
        let mut worst = 0.0f64;
        for_each_moebius_power(z0, n_max, rows, |n, p| {
            let mut head = 0.0;
            let mut tail = 0.0;
            for (i, c) in p.iter().enumerate() {
                let v = (c * beta[i]).norm_sqr();
                if i + 64 >= rows {
                    tail += v;
                }
                head += v;
            }
            let rel = (tail / head).sqrt();
            worst = worst.max(rel);
            r.push(head.sqrt() / beta[n]);
            rel < 1e-6
        });
        if r.len() == n_max + 1 && worst < 1e-6 {
            return Ok(ColumnNormProfile {
                z0,
                weights: w.id(),
                r,
                k: rows,
                tail: worst,
            });
        }
        rows *= 2;
    }
}

/// `‖(φ')^N‖_{H²}` for `φ(z) = (t − z)/(1 − tz)`, `0 < t < 1`, from the
/// coefficients `(1−t²)^N C(k+2N−1, k) t^k` of `(1−t²)^N (1 − tz)^{−2N}`.
pub fn claim_norm(t: f64, n: u32) -> f64 {
    assert!(t > 0.0 && t < 1.0 && n >= 1);
    let two_n = 2.0 * n as f64;
    let mut c = 1.0f64;
    let mut sum = crate::series::CompensatedSum::default();
    let mut k = 0usize;
    loop {
        let term = c * c;
        sum.add(C::new(term, 0.0));
        if k > 10 && term < 1e-18 * sum.value().re {
            break;
        }
        c *= (k as f64 + two_n) / (k as f64 + 1.0) * t;
        k += 1;
    }
    (1.0 - t * t).powi(n as i32) * sum.value().re.sqrt()
}

/// `(1+t)^N / ((1−t)^{N−1} √(2π(2N−1)))`
pub fn claim_bound(t: f64, n: u32) -> f64 {
    let nf = n as f64;
    (1.0 + t).powi(n as i32) / ((1.0 - t).powi(n as i32 - 1) * (2.0 * std::f64::consts::PI * (2.0 * nf - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn b(z: &[C]) -> BlaschkeProduct {
        BlaschkeProduct::new(z.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn identity_frame_is_orthonormal_base() {
        for w in [WeightSequence::hardy(), WeightSequence::bergman(1.0).unwrap(), WeightSequence::nln()] {
            let f = build_frame(&BlaschkeProduct::identity(), &w, 20, 64).unwrap();
            let a = f.matrix().unwrap();
            for i in 0..64 {
                for j in 0..21 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((a[(i, j)] - c(expect, 0.0)).norm() < 1e-13, "{w} ({i},{j})");
                }
            }
            let r = gram_bounds(&f).unwrap();
            assert!((r.0 - 1.0).abs() < 1e-13 && (r.1 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_column() {
        let f = build_frame(&b(&[c(0.0, 0.0), c(0.5, 0.0)]), &WeightSequence::hardy(), 10, 64).unwrap();
        let col = f.raw_column(1, 0);
        for (k, v) in col.iter().enumerate().take(10) {
            assert!((v - c(0.5f64.powi(k as i32), 0.0)).norm() < 1e-16);
        }
    }

    #[test]
    fn bergman_column_matches_series_product() {
        let w = WeightSequence::bergman(1.0).unwrap();
        let bp = b(&[c(0.0, 0.0), c(0.5, 0.0)]);
        let f = build_frame(&bp, &w, 5, 64).unwrap();
        let a = f.matrix().unwrap();
        // column (j=1 → zero 0, n=1) is B(z)/β_1 in orthonormal coordinates
        let t = bp.taylor(63);
        let b1 = w.beta(1).unwrap();
        for k in 0..64 {
            let expect = t.coeffs()[k] * w.beta(k).unwrap() / b1;
            assert!((a[(k, 2)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn hardy_gram_blocks() {
        let f = build_frame(&b(&[c(0.0, 0.0), c(0.5, 0.0)]), &WeightSequence::hardy(), 30, 256)
            .unwrap()
            .with_normalization(Normalization::Raw);
        let g = gram(&f).unwrap();
        for n in 0..=30 {
            let i = 2 * n;
            assert!((g[(i, i)] - c(1.0, 0.0)).norm() < 1e-8);
            assert!((g[(i, i + 1)] - c(1.0, 0.0)).norm() < 1e-8);
            assert!((g[(i + 1, i + 1)] - c(4.0 / 3.0, 0.0)).norm() < 1e-8);
        }
        for r in 0..g.nrows() {
            for s in 0..g.ncols() {
                if r / 2 != s / 2 {
                    assert!(g[(r, s)].norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn repeated_zeros_rejected() {
        let bp = b(&[c(0.2, 0.0), c(0.2, 0.0)]);
        assert!(matches!(build_frame(&bp, &WeightSequence::hardy(), 4, 64), Err(LabError::RepeatedZeros { .. })));
    }

    #[test]
    fn normalization_moves_a_zero_to_origin() {
        let bp = b(&[c(0.3, 0.1), c(-0.4, 0.2)]);
        let f = build_frame(&bp, &WeightSequence::hardy(), 4, 64).unwrap();
        let conj = f.conjugation.as_ref().unwrap();
        assert!(f.blaschke.zeros().iter().any(|z| z.norm() == 0.0));
        for z in [c(0.1, 0.2), c(-0.3, -0.5)] {
            let expect = conj.post.eval(bp.eval(conj.pre.eval(z)));
            assert!((f.blaschke.eval(z) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn dual_of_identity_and_pair() {
        let f = build_frame(&BlaschkeProduct::identity(), &WeightSequence::hardy(), 10, 32).unwrap();
        let d = dual_frame(&f).unwrap();
        assert!(linalg::max_abs_diff(&d.y, &f.matrix().unwrap(), 32, 11) < 1e-14);
        let f = build_frame(&b(&[c(0.0, 0.0), c(0.5, 0.0)]), &WeightSequence::hardy(), 50, 512).unwrap();
        let d = dual_frame(&f).unwrap();
        assert!(d.residual < 1e-8);
    }

    #[test]
    fn kernel_matrix_examples() {
        let k = kernel_matrix(&[c(0.0, 0.0)]).unwrap();
        assert_eq!(k.a[(0, 0)], c(1.0, 0.0));
        assert_eq!(k.inverse[(0, 0)], c(1.0, 0.0));
        let k = kernel_matrix(&[c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!((k.a[(1, 1)] - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        let det = k.a[(0, 0)] * k.a[(1, 1)] - k.a[(0, 1)] * k.a[(1, 0)];
        assert!((det - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let k = kernel_matrix(&[c(0.0, 0.0), c(0.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert!((k.a[(1, 2)] - c(0.8, 0.0)).norm() < 1e-15);
        assert!(k.min_singular > 0.0);
        assert!(kernel_matrix(&[c(0.1, 0.0), c(0.1, 0.0)]).is_err());
    }

    #[test]
    fn cpb_examples() {
        let r = cpb_check(&BlaschkeProduct::identity(), &WeightSequence::hardy(), 10, 64).unwrap();
        assert!(r.max_deviation < 1e-14);
        let r = cpb_check(&b(&[c(0.0, 0.0), c(0.5, 0.0)]), &WeightSequence::hardy(), 30, 512).unwrap();
        assert!(r.max_deviation < 1e-8, "{r:?}");
        let r = cpb_check(&b(&[c(0.0, 0.0), c(0.0, 0.3)]), &WeightSequence::bergman(1.0).unwrap(), 30, 512).unwrap();
        assert!(r.max_deviation < 1e-8, "{r:?}");
    }

    #[test]
    fn moebius_duality_examples() {
        let r = moebius_duality_check(c(0.0, 0.0), &WeightSequence::bergman(1.0).unwrap(), 20, 64).unwrap();
        assert!(r.max_deviation < 1e-14);
        assert!((r.scale.unwrap() - 1.0).abs() < 1e-14);
        let r = moebius_duality_check(c(0.5, 0.0), &WeightSequence::hardy(), 40, 512).unwrap();
        assert!(r.max_deviation < 1e-8, "{r:?}");
        assert!((r.scale.unwrap() - 4.0 / 3.0).abs() < 1e-8);
        let r = moebius_duality_check(c(0.0, 0.3), &WeightSequence::bergman(1.0).unwrap(), 40, 512).unwrap();
        assert!(r.max_deviation < 1e-8, "{r:?}");
        assert!((r.scale.unwrap() - 1.0 / 0.91).abs() < 1e-8);
    }

    #[test]
    fn profile_limits() {
        let p = column_norm_profile(c(0.5, 0.0), &WeightSequence::hardy(), 40).unwrap();
        assert_eq!(p.r[0], 1.0);
        assert!(p.r.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let p = column_norm_profile(c(1e-6, 0.0), &WeightSequence::bergman(1.0).unwrap(), 60).unwrap();
        assert!(p.r.iter().all(|r| (r - 1.0).abs() < 1e-3));
    }

    #[test]
    fn claim_norm_oracle() {
        assert!((claim_norm(0.5, 1) - (5.0f64 / 3.0).sqrt()).abs() < 1e-10);
        // trapezoid rule on the circle is spectrally accurate for |φ'|^{2N}
        for &t in &[0.3, 0.5, 0.7] {
            for n in 1..=5u32 {
                let s = 4096;
                let mean: f64 = (0..s)
                    .map(|j| {
                        let z = C::from_polar(1.0, std::f64::consts::TAU * j as f64 / s as f64);
                        ((1.0 - t * t) / (1.0 - t * z).norm_sqr()).powi(2 * n as i32)
                    })
                    .sum::<f64>()
                    / s as f64;
                assert!((claim_norm(t, n) - mean.sqrt()).abs() < 1e-9 * mean.sqrt());
            }
        }
    }

    proptest! {
        #[test]
        fn hardy_gram_is_kernel_block_diagonal(r1 in 0.05f64..0.7, a1 in 0.0f64..6.28, r2 in 0.05f64..0.7, a2 in 0.0f64..6.28) {
            let z1 = C::from_polar(r1, a1);
            let z2 = C::from_polar(r2, a2);
            prop_assume!((z1 - z2).norm() > 0.05);
            let pts = [c(0.0, 0.0), z1, z2];
            let f = build_frame(&b(&pts), &WeightSequence::hardy(), 6, 256).unwrap().with_normalization(Normalization::Raw);
            let g = gram(&f).unwrap();
            let km = kernel_matrix(&pts).unwrap().a;
            for n in 0..=6 {
                for i in 0..3 {
                    for j in 0..3 {
                        // ⟨x_j, x_i⟩ = k_j(z_i)
                        prop_assert!((g[(3 * n + i, 3 * n + j)] - km[(j, i)]).norm() < 1e-8);
                    }
                }
            }
        }
    }
}
