//! Similarity certificates and verdicts: the Douglas intertwiner for `M_B`,
//! Jordan decompositions of `f(S_β)` bundles, Möbius matching of
//! indecomposable parts, and the divergence probe for Möbius frames.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{Holomorphic, PushForward};
use crate::blaschke::{BlaschkeProduct, MoebiusTransform};
use crate::error::{LabError, Result};
use crate::frames::{self, build_frame, column_norm_profile, gram_bounds, riesz_bounds, ColumnNormProfile, Conjugation, RieszReport};
use crate::linalg::{self, CMatrix};
use crate::monodromy::{decompose, outer_factor, Decomposition};
use crate::operators::mult_matrix;
use crate::series::{FunctionSpec, PowerSeries};
use crate::weights::{GrowthClass, WeightSequence};

type C = Complex64;

/// Relative intertwining residual accepted for a certificate.
pub const CERT_TOL: f64 = 1e-8;
/// Largest truncation [`jordan`] grows to.
pub const MAX_K: usize = 4096;
/// Relative residual for a Möbius match.
pub const MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityCertificate {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_max: usize,
    pub m: usize,
    pub rows: usize,
    pub cols: usize,
    /// Columns `(j, n)` on which the residual is measured.
    pub block_cols: usize,
    pub residual: f64,
    pub cond: f64,
    pub c1: f64,
    pub c2: f64,
    pub riesz: Option<RieszReport>,
    pub conjugation: Option<Conjugation>,
    pub weights: String,
    pub accepted: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub x: Option<CMatrix>,
    /// The Blaschke product the frame was built from (after normalization).
    pub blaschke: BlaschkeProduct,
}

/// Apply `⊕^m M_g` (orthonormal coordinates, index `n` per copy) on the right
/// of `X`, for columns `n ≤ last`.
fn right_direct_sum(x: &CMatrix, g: &PowerSeries, beta: &[f64], m: usize, n_max: usize, last: usize) -> CMatrix {
    let rows = x.nrows();
    let mut out = CMatrix::zeros(rows, m * (last + 1));
    for n in 0..=last {
        for j in 0..m {
            let mut col = nalgebra::DVector::<C>::zeros(rows);
            for np in n..=n_max {
                let c = g.coeff(np - n).unwrap_or(C::new(0.0, 0.0));
                if c == C::new(0.0, 0.0) {
                    continue;
                }
                col.axpy(c * (beta[np] / beta[n]), &x.column(np * m + j), C::new(1.0, 0.0));
            }
            out.set_column(n * m + j, &col);
        }
    }
    out
}

/// `X` with columns `(1/(1 − z̄_j z))·B^n/β_n` and the residual of
/// `M_B X − X(⊕^m M_z)` on columns `n < n_max`.
pub fn douglas_intertwiner(b: &BlaschkeProduct, w: &WeightSequence, k: usize, n_max: usize) -> Result<SimilarityCertificate> {
    douglas_inner(b, w, k, n_max, true)
}

fn douglas_inner(b: &BlaschkeProduct, w: &WeightSequence, k: usize, n_max: usize, with_riesz: bool) -> Result<SimilarityCertificate> {
    let mut notes = Vec::new();
    let growth = crate::weights::growth_classify(w, k.max(1000))?;
    if growth.classification != GrowthClass::Polynomial {
        notes.push(format!("weights {} are not certified polynomial growth", w.id()));
    }
    let frame = build_frame(b, w, n_max, k)?;
    let m = frame.m();
    let x = frame.matrix()?;
    let beta = w.betas(n_max + 1)?;
    let mb = mult_matrix(&frame.blaschke.taylor(k - 1), w, k)?;
    let left = &mb.entries * &x;
    let z = PowerSeries::monomial(1, 1);
    let last = n_max.saturating_sub(1);
    let right = right_direct_sum(&x, &z, &beta, m, n_max, last);
    let block_cols = m * (last + 1);
    let residual = linalg::max_abs_diff(&left, &right, k, block_cols);
    let (c1, c2, _) = gram_bounds(&frame)?;
    let cond = if c1 > 0.0 { (c2 / c1).sqrt() } else { f64::INFINITY };
    let riesz = if with_riesz { Some(riesz_bounds(&frame)?) } else { None };
    let scale = linalg::max_abs(&left).max(1.0);
    let mut accepted = residual < CERT_TOL * scale && cond.is_finite();
    if let Some(r) = &riesz {
        if r.verdict != "Riesz-consistent" {
            accepted = false;
            notes.push(format!("frame is {} under doubling", r.verdict));
        }
    }
    Ok(SimilarityCertificate {
        k,
        n_max,
        m,
        rows: x.nrows(),
        cols: x.ncols(),
        block_cols,
        residual,
        cond,
        c1,
        c2,
        riesz,
        conjugation: frame.conjugation.clone(),
        weights: w.id(),
        accepted,
        notes,
        x: Some(x),
        blaschke: frame.blaschke.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Jordan {
    pub m: usize,
    pub decomposition: Decomposition,
    /// `h̃ = h∘φ` with `f = h̃∘B̃` and `B̃(0) = 0`.
    pub h: PushForward,
    pub b: BlaschkeProduct,
    pub h_taylor: Option<PowerSeries>,
    /// `ψ` when the certificate is for `f∘ψ` (similar to `f` by a Möbius change of variable).
    pub precomposed: Option<MoebiusTransform>,
    pub certificate: SimilarityCertificate,
}

/// Default truncation for [`jordan`]: `K = 256`; `n_max` leaves room for the Taylor length of `h`.
pub fn jordan(f: &FunctionSpec, w: &WeightSequence) -> Result<Jordan> {
    jordan_with(f, w, 256, None, None)
}

pub fn jordan_with(f: &FunctionSpec, w: &WeightSequence, k: usize, n_max: Option<usize>, omega0: Option<C>) -> Result<Jordan> {
    let dec = decompose(f, omega0)?;
    let m = dec.m;
    if m == 1 {
        let n_max = n_max.unwrap_or(k / 8);
        let mut cert = douglas_inner(&BlaschkeProduct::identity(), w, k, n_max, true)?;
        // X = I on the leading block, so the intertwining is trivially exact
        cert.residual = 0.0;
        return Ok(Jordan {
            m,
            h: PushForward::new(f.clone(), BlaschkeProduct::identity()),
            b: BlaschkeProduct::identity(),
            decomposition: dec,
            h_taylor: None,
            precomposed: None,
            certificate: cert,
        });
    }
    // move a zero of B to the origin, precomposing f when B(0) is a branch value
    let (b, conj) = frames::normalize(&dec.b)?;
    let pre = conj.as_ref().map(|c| c.pre.clone()).filter(|p| p.as_blaschke() != &BlaschkeProduct::identity());
    let f_eff = match &pre {
        Some(p) => FunctionSpec::compose(f.clone(), FunctionSpec::Blaschke(p.as_blaschke().clone())),
        None => f.clone(),
    };
    let h = PushForward::new(f_eff.clone(), b.clone());
    let outer = outer_factor(&f_eff, &b, 0.7, 1024)?;
    let len = outer.taylor.coeffs().len();
    let cap = (k / (2 * m)).saturating_sub(1);
    let n_max = n_max.unwrap_or_else(|| (k / (8 * m)).max(len + 16).min(cap));
    let last = if n_max >= len + 4 { n_max - len } else { n_max / 2 };
    // B^n spreads over about n·Σ(1+|z_j|)/(1−|z_j|) coefficients
    let spread: f64 = b.zeros().iter().map(|z| (1.0 + z.norm()) / (1.0 - z.norm())).sum();
    let k = k.max(((spread * n_max as f64) as usize + 64).next_power_of_two()).min(MAX_K);
    let mut cert = douglas_inner(&b, w, k, n_max, true)?;
    let x = cert.x.clone().expect("douglas keeps X");
    let mf = mult_matrix(&f_eff.taylor(k - 1)?, w, k)?;
    let left = &mf.entries * &x;
    let beta = w.betas(n_max + 1)?;
    let right = right_direct_sum(&x, &outer.taylor, &beta, m, n_max, last);
    let block_cols = m * (last + 1);
    let residual = linalg::max_abs_diff(&left, &right, k, block_cols);
    let scale = linalg::max_abs(&left).max(1.0);
    cert.residual = cert.residual.max(residual);
    cert.block_cols = block_cols;
    if residual >= CERT_TOL * scale {
        cert.accepted = false;
        cert.notes.push(format!("M_f X − X(⊕M_h) residual {residual:.3e}"));
    }
    Ok(Jordan {
        m,
        decomposition: dec,
        h,
        b,
        h_taylor: Some(outer.taylor),
        precomposed: pre,
        certificate: cert,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMatch {
    pub phi: MoebiusTransform,
    pub residual: f64,
    pub seed: C,
}

fn match_samples() -> Vec<C> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..64)
        .map(|s| C::from_polar(0.6 * ((s as f64 + 0.5) / 64.0).sqrt(), golden * s as f64))
        .collect()
}

/// `(residuals, Jacobian)` of `g2(ζ) − g1(φ(ζ))` in `(θ, Re z₀, Im z₀)`.
fn lm_system(g1: &impl Holomorphic, target: &[C], zeta: &[C], p: &[f64; 3]) -> (Vec<C>, Vec<[C; 3]>) {
    let z0 = C::new(p[1], p[2]);
    let e = C::from_polar(1.0, p[0]);
    let mut r = Vec::with_capacity(zeta.len());
    let mut jac = Vec::with_capacity(zeta.len());
    for (&z, &t) in zeta.iter().zip(target) {
        let n = z0 - z;
        let d = 1.0 - z0.conj() * z;
        let phi = e * n / d;
        let (v, dv) = g1.eval_with_derivative(phi);
        r.push(t - v);
        let d2 = d * d;
        let dphi = [C::new(0.0, 1.0) * phi, e * (d + n * z) / d2, e * C::new(0.0, 1.0) * (d - n * z) / d2];
        jac.push([-dv * dphi[0], -dv * dphi[1], -dv * dphi[2]]);
    }
    (r, jac)
}

fn max_norm(r: &[C]) -> f64 {
    r.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn refine(g1: &impl Holomorphic, target: &[C], zeta: &[C], mut p: [f64; 3]) -> ([f64; 3], f64) {
    let cost = |r: &[C]| r.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let (mut r, mut jac) = lm_system(g1, target, zeta, &p);
    if r.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return (p, f64::INFINITY);
    }
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut a = Matrix3::<f64>::zeros();
        let mut g = Vector3::<f64>::zeros();
        for (rs, js) in r.iter().zip(&jac) {
            for i in 0..3 {
                g[i] += js[i].re * rs.re + js[i].im * rs.im;
                for k in 0..3 {
                    a[(i, k)] += js[i].re * js[k].re + js[i].im * js[k].im;
                }
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut damped = a;
            for i in 0..3 {
                damped[(i, i)] += lambda * (a[(i, i)] + 1e-12);
            }
            let Some(delta) = damped.lu().solve(&(-g)) else {
                lambda *= 10.0;
                continue;
            };
            let q = [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]];
            if C::new(q[1], q[2]).norm() >= 1.0 - 1e-9 {
                lambda *= 10.0;
                continue;
            }
            let (rq, jq) = lm_system(g1, target, zeta, &q);
            if cost(&rq) < cost(&r) {
                let step = delta.norm();
                p = q;
                r = rq;
                jac = jq;
                lambda = (lambda / 3.0).max(1e-15);
                improved = step > 1e-15;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (p, max_norm(&r))
}

/// A Möbius map `φ` with `g2 = g1∘φ` on 𝔻, if one exists.
///
/// Seeds come from the fiber of `g1` over `g2(0)` with the angle matched to
/// `g2'(0) = g1'(p)·φ'(0)`; each seed is refined by Levenberg–Marquardt over
/// 64 fixed disk samples.
pub fn moebius_match(g1: &impl Holomorphic, g2: &impl Holomorphic) -> Result<Option<MoebiusMatch>> {
    let zeta = match_samples();
    let target: Vec<C> = zeta.iter().map(|&z| g2.eval(z)).collect();
    let scale = max_norm(&target).max(1.0);
    let (v0, d0) = g2.eval_with_derivative(C::new(0.0, 0.0));
    let fiber = g1.fiber(v0)?;
    let mut seeds: Vec<(C, f64)> = Vec::new();
    for p in fiber.distinct() {
        let (_, d1) = g1.eval_with_derivative(p);
        if d1.norm() > 1e-8 && d0.norm() > 1e-8 {
            // φ'(0) = e^{iθ}(|z₀|² − 1) points opposite to e^{iθ}
            let theta = (-(d0 / d1)).arg();
            seeds.push((p, theta));
        } else {
            seeds.extend((0..8).map(|k| (p, k as f64 * PI / 4.0)));
        }
    }
    let mut best: Option<MoebiusMatch> = None;
    for (p, theta) in seeds {
        let z0 = C::from_polar(1.0, -theta) * p;
        let (q, res) = refine(g1, &target, &zeta, [theta, z0.re, z0.im]);
        if res.is_finite() && best.as_ref().is_none_or(|b| res < b.residual) {
            best = Some(MoebiusMatch {
                phi: MoebiusTransform::new(C::new(q[1], q[2]), q[0].rem_euclid(TAU))?,
                residual: res,
                seed: p,
            });
        }
    }
    Ok(best.filter(|b| b.residual < MATCH_TOL * scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotSimilarReason {
    OrderMismatch,
    MoebiusMatchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Similar,
    NotSimilar { reason: NotSimilarReason },
    Inconclusive { diagnostics: Vec<String> },
}

impl Verdict {
    pub fn is_similar(&self) -> bool {
        matches!(self, Verdict::Similar)
    }

    /// CLI exit status: 0 similar, 1 not similar, 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Similar => 0,
            Verdict::NotSimilar { .. } => 1,
            Verdict::Inconclusive { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub verdict: Verdict,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub matching: Option<MoebiusMatch>,
    pub jordan1: Option<Jordan>,
    pub jordan2: Option<Jordan>,
}

fn verdict_from(j1: &Jordan, j2: &Jordan, mult: usize) -> Result<(Verdict, Option<MoebiusMatch>)> {
    let mut diagnostics = Vec::new();
    for (i, j) in [j1, j2].iter().enumerate() {
        if !j.certificate.accepted {
            diagnostics.push(format!("certificate {} not accepted: {}", i + 1, j.certificate.notes.join("; ")));
        }
    }
    if !diagnostics.is_empty() {
        return Ok((Verdict::Inconclusive { diagnostics }, None));
    }
    if mult * j1.m != mult * j2.m {
        return Ok((
            Verdict::NotSimilar {
                reason: NotSimilarReason::OrderMismatch,
            },
            None,
        ));
    }
    match moebius_match(&j1.h, &j2.h)? {
        Some(mm) => Ok((Verdict::Similar, Some(mm))),
        None => Ok((
            Verdict::NotSimilar {
                reason: NotSimilarReason::MoebiusMatchFailed,
            },
            None,
        )),
    }
}

fn jordan_or_diag(f: &FunctionSpec, w: &WeightSequence) -> std::result::Result<Jordan, String> {
    jordan(f, w).map_err(|e| format!("`{f}`: {e}"))
}

/// Same `m` and Möbius-equivalent indecomposable parts.
pub fn similar(h1: &FunctionSpec, h2: &FunctionSpec, w: &WeightSequence) -> Result<SimilarityReport> {
    let (j1, j2) = rayon::join(|| jordan_or_diag(h1, w), || jordan_or_diag(h2, w));
    similar_from(j1, j2, 1)
}

fn similar_from(
    j1: std::result::Result<Jordan, String>,
    j2: std::result::Result<Jordan, String>,
    mult: usize,
) -> Result<SimilarityReport> {
    match (j1, j2) {
        (Ok(j1), Ok(j2)) => {
            let (verdict, matching) = verdict_from(&j1, &j2, mult)?;
            Ok(SimilarityReport {
                verdict,
                m1: Some(mult * j1.m),
                m2: Some(mult * j2.m),
                matching,
                jordan1: Some(j1),
                jordan2: Some(j2),
            })
        }
        (a, b) => {
            let diagnostics = [a.as_ref().err(), b.as_ref().err()].into_iter().flatten().cloned().collect();
            Ok(SimilarityReport {
                verdict: Verdict::Inconclusive { diagnostics },
                m1: a.as_ref().ok().map(|j| mult * j.m),
                m2: b.as_ref().ok().map(|j| mult * j.m),
                matching: None,
                jordan1: a.ok(),
                jordan2: b.ok(),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaplanskyReport {
    pub double_verdict: Verdict,
    pub single_verdict: Verdict,
    pub consistent: bool,
    pub single: SimilarityReport,
}

/// Compare `E_{h1} ⊕ E_{h1}` with `E_{h2} ⊕ E_{h2}` (multiplicities `2m`)
/// and the single bundles; consistent unless the doubles are similar while
/// the singles are not.
pub fn kaplansky(h1: &FunctionSpec, h2: &FunctionSpec, w: &WeightSequence) -> Result<KaplanskyReport> {
    let single = similar(h1, h2, w)?;
    let double_verdict = match (&single.jordan1, &single.jordan2) {
        (Some(j1), Some(j2)) => verdict_from(j1, j2, 2)?.0,
        _ => single.verdict.clone(),
    };
    let consistent = !double_verdict.is_similar() || single.verdict.is_similar();
    Ok(KaplanskyReport {
        double_verdict,
        single_verdict: single.verdict.clone(),
        consistent,
        single,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondStep {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub cond: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub t: f64,
    pub weights: String,
    pub profile: ColumnNormProfile,
    /// Least-squares slope of `ln r_n` against `ln n` over `n ≥ n_max/16`.
    pub slope: f64,
    pub ladder: Vec<CondStep>,
    pub verdict: String,
}

/// Column-norm profile of `φ_t^n` and the condition number of the truncated
/// Möbius frame along a doubling ladder.
pub fn counterexample_probe(t: f64, w: &WeightSequence, n_max: usize) -> Result<CounterexampleReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(LabError::Domain(format!("t = {t} is outside (0, 1)")));
    }
    let z0 = C::new(t, 0.0);
    let profile = column_norm_profile(z0, w, n_max)?;
    let lo = (n_max / 16).max(1);
    let pts: Vec<(f64, f64)> = (lo..=n_max).map(|n| ((n as f64).ln(), profile.r[n].ln())).collect();
    let slope = fit_slope(&pts);
    let phi = BlaschkeProduct::new(vec![z0], 0.0)?;
    let spread = ((1.0 + t) / (1.0 - t)).ceil() as usize;
    let mut ladder = Vec::new();
    let mut n = 25usize.min(n_max.max(1));
    while n <= n_max.min(200) {
        let k = (spread + 1) * n + 64;
        let frame = build_frame(&phi, w, n, k)?;
        let (c1, c2, _) = gram_bounds(&frame)?;
        ladder.push(CondStep {
            n,
            k,
            cond: if c1 > 0.0 { (c2 / c1).sqrt() } else { f64::INFINITY },
        });
        n *= 2;
    }
    let range = profile.r[lo..].iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let cond_growth = match (ladder.first(), ladder.last()) {
        (Some(a), Some(b)) if ladder.len() >= 2 => b.cond / a.cond,
        _ => 1.0,
    };
    let last_change = if ladder.len() >= 2 {
        let (a, b) = (&ladder[ladder.len() - 2], &ladder[ladder.len() - 1]);
        (b.cond - a.cond).abs() / a.cond
    } else {
        0.0
    };
    let verdict = if slope > 0.05 && cond_growth > 1.2 {
        "no bounded similarity at probed scales"
    } else if range.1 / range.0 < 1.5 && last_change < 0.05 {
        "similarity-consistent"
    } else {
        "inconclusive"
    };
    Ok(CounterexampleReport {
        t,
        weights: w.id(),
        profile,
        slope,
        ladder,
        verdict: verdict.to_string(),
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
