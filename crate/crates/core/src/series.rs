//! Truncated complex Taylor series `Σ_{k≤K} f̂(k) z^k` and the weighted
//! inner product of `H²_β`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::weights::WeightSequence;

pub mod expr;

pub use expr::{taylor, FunctionSpec};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Samples used to estimate `sup_{|z|=1} |g(z)|` in [`compose`].
pub const SUP_SAMPLES: usize = 4096;

/// Default margin for the composition domain guard.
pub const COMPOSE_MARGIN: f64 = 1e-3;

/// Coefficients `f̂(0..=K)`. When `exact` is set the coefficients beyond `K`
/// are known to vanish, so the series is a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<C>,
    exact: bool,
}

impl PowerSeries {
    /// A disk truncation of order `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<C>) -> Self {
        Self::build(coeffs, false)
    }

    /// A polynomial, padded with zeros or checked to fit into order `k`.
    pub fn polynomial(coeffs: &[C], k: usize) -> Self {
        let mut c = vec![ZERO; k + 1];
        let mut fits = true;
        for (i, &a) in coeffs.iter().enumerate() {
            if i <= k {
                c[i] = a;
            } else if a != ZERO {
                fits = false;
            }
        }
        Self::build(c, fits)
    }

    fn build(coeffs: Vec<C>, exact: bool) -> Self {
        assert!(!coeffs.is_empty(), "a power series needs at least one coefficient");
        assert!(
            coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "power series coefficients must be finite"
        );
        PowerSeries { coeffs, exact }
    }

    pub fn zeros(k: usize) -> Self {
        Self::build(vec![ZERO; k + 1], true)
    }

    pub fn one(k: usize) -> Self {
        Self::monomial(0, k)
    }

    /// `z^n` truncated at order `k` (zero when `n > k`).
    pub fn monomial(n: usize, k: usize) -> Self {
        let mut c = vec![ZERO; k + 1];
        if n <= k {
            c[n] = C::new(1.0, 0.0);
        }
        Self::build(c, n <= k)
    }

    /// `1/(1 − ā z)`, coefficients `ā^k`.
    pub fn geom(a: C, k: usize) -> Self {
        let ac = a.conj();
        let mut c = Vec::with_capacity(k + 1);
        let mut p = C::new(1.0, 0.0);
        for _ in 0..=k {
            c.push(p);
            p *= ac;
        }
        Self::build(c, a == ZERO)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C> {
        self.coeffs
    }

    /// `f̂(k)`, zero beyond the truncation only when the series is exact.
    pub fn coeff(&self, k: usize) -> Option<C> {
        match self.coeffs.get(k) {
            Some(&c) => Some(c),
            None if self.exact => Some(ZERO),
            None => None,
        }
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Index of the last nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != ZERO).unwrap_or(0)
    }

    pub fn truncate(&self, k: usize) -> Self {
        if k >= self.order() {
            if self.exact {
                let mut c = self.coeffs.clone();
                c.resize(k + 1, ZERO);
                return Self::build(c, true);
            }
            return self.clone();
        }
        let exact = self.exact && self.coeffs[k + 1..].iter().all(|c| *c == ZERO);
        Self::build(self.coeffs[..=k].to_vec(), exact)
    }

    fn combined_order(&self, other: &Self) -> usize {
        match (self.exact, other.exact) {
            (true, true) => self.order().max(other.order()),
            (true, false) => other.order(),
            (false, true) => self.order(),
            (false, false) => self.order().min(other.order()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let k = self.combined_order(other);
        let c = (0..=k)
            .map(|i| self.coeff(i).unwrap_or(ZERO) + other.coeff(i).unwrap_or(ZERO))
            .collect();
        Self::build(c, self.exact && other.exact)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C) -> Self {
        Self::build(self.coeffs.iter().map(|&c| c * s).collect(), self.exact)
    }

    /// `f*(z) = conj(f(conj z))`: conjugated coefficients.
    pub fn star(&self) -> Self {
        Self::build(self.coeffs.iter().map(|c| c.conj()).collect(), self.exact)
    }

    pub fn eval(&self, z: C) -> C {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn eval_with_derivative(&self, z: C) -> (C, C) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `1/f`, requires `f̂(0) ≠ 0`.
    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.norm() < 1e-300 {
            return Err(LabError::Domain("series reciprocal needs a nonzero constant term".into()));
        }
        let k = self.order();
        let mut r = vec![ZERO; k + 1];
        r[0] = 1.0 / a0;
        for n in 1..=k {
            let mut s = ZERO;
            for i in 1..=n {
                s += self.coeffs[i] * r[n - i];
            }
            r[n] = -s / a0;
        }
        let exact = self.exact && self.degree() == 0;
        Ok(Self::build(r, exact))
    }

    /// Multiply by the factor `(a − z)/(1 − ā z)`, O(K).
    pub fn mul_moebius_factor(&self, a: C) -> Self {
        let k = self.order();
        let mut g = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let prev = if i > 0 { self.coeffs[i - 1] } else { ZERO };
            g.push(a * self.coeffs[i] - prev);
        }
        divide_by_one_minus(&mut g, a.conj());
        Self::build(g, false)
    }

    /// Estimate of `sup_{|z|=1} |f(z)|`: maximum over `samples` equispaced
    /// points plus the Lipschitz pad `(Σ k|f̂(k)|)·π/samples`.
    pub fn sup_on_circle(&self, samples: usize) -> f64 {
        let values = sample_circle(&self.coeffs, 1.0, samples);
        let m = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let lip: f64 = self.coeffs.iter().enumerate().map(|(k, c)| k as f64 * c.norm()).sum();
        m + lip * PI / samples as f64
    }
}

/// In place: `g ← g/(1 − c z)` via `out_k = g_k + c·out_{k−1}`.
pub(crate) fn divide_by_one_minus(g: &mut [C], c: C) {
    for i in 1..g.len() {
        let prev = g[i - 1];
        g[i] += c * prev;
    }
}

/// `f(r e^{2πij/S})` for `j < S`, by FFT of the folded coefficient vector.
pub(crate) fn sample_circle(coeffs: &[C], r: f64, samples: usize) -> Vec<C> {
    use rustfft::FftPlanner;
    let mut buf = vec![ZERO; samples];
    let mut rk = 1.0f64;
    for (k, &c) in coeffs.iter().enumerate() {
        buf[k % samples] += c * rk;
        rk *= r;
    }
    // f(ζ_j) = Σ c_k e^{2πijk/S} is an inverse DFT without normalization
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(samples).process(&mut buf);
    buf
}

/// `(1/S) Σ_j v_j e^{−2πijk/S}`: coefficients of `f(rζ)` from samples on the circle.
pub(crate) fn sample_circle_inverse(values: &[C]) -> Vec<C> {
    use rustfft::FftPlanner;
    let s = values.len();
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(s).process(&mut buf);
    for c in buf.iter_mut() {
        *c /= s as f64;
    }
    buf
}

impl Serialize for PowerSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PowerSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        if pairs.is_empty() {
            return Err(serde::de::Error::custom("empty coefficient array"));
        }
        if pairs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite coefficient"));
        }
        Ok(PowerSeries::new(pairs.into_iter().map(|[re, im]| C::new(re, im)).collect()))
    }
}

/// Cauchy product truncated at the smaller truncation.
pub fn multiply(f: &PowerSeries, g: &PowerSeries) -> PowerSeries {
    let k = f.combined_order(g);
    let fc: Vec<C> = (0..=k).map(|i| f.coeff(i).unwrap_or(ZERO)).collect();
    let gc: Vec<C> = (0..=k).map(|i| g.coeff(i).unwrap_or(ZERO)).collect();
    let mut out = vec![ZERO; k + 1];
    for (i, &a) in fc.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        for (o, &b) in out[i..].iter_mut().zip(&gc) {
            *o += a * b;
        }
    }
    let exact = f.exact && g.exact && f.degree() + g.degree() <= k;
    PowerSeries::build(out, exact)
}

/// Result of [`compose`] with the declared truncation tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub series: PowerSeries,
    /// `|f̂(K_f)|·s^{K_f}/(1 − s)` with `s` the estimated `sup|g|`; zero for polynomial `f`.
    pub tail_bound: f64,
    pub sup_inner: f64,
}

/// `f∘g` through order `k` by Horner's scheme in truncated arithmetic.
pub fn compose(f: &PowerSeries, g: &PowerSeries, k: usize) -> Result<Composition> {
    compose_with_margin(f, g, k, COMPOSE_MARGIN)
}

pub fn compose_with_margin(f: &PowerSeries, g: &PowerSeries, k: usize, margin: f64) -> Result<Composition> {
    let sup_inner = g.sup_on_circle(SUP_SAMPLES);
    let tail_bound = if f.exact {
        0.0
    } else {
        if sup_inner >= 1.0 - margin {
            return Err(LabError::Domain(format!(
                "inner series reaches {sup_inner:.6} on the unit circle; composing a disk truncation needs sup|g| < {}",
                1.0 - margin
            )));
        }
        let kf = f.order();
        f.coeffs[kf].norm() * sup_inner.powi(kf as i32) / (1.0 - sup_inner)
    };
    let g = g.truncate(k);
    let gk = PowerSeries::build(g.coeffs.clone(), false);
    let top = if f.exact { f.degree() } else { f.order() };
    let mut acc = PowerSeries::build(vec![ZERO; k + 1], false);
    for i in (0..=top).rev() {
        acc = multiply(&acc, &gk);
        acc.coeffs[0] += f.coeffs[i];
    }
    let exact = f.exact && g.exact && top * g.degree() <= k;
    Ok(Composition {
        series: PowerSeries::build(acc.coeffs, exact),
        tail_bound,
        sup_inner,
    })
}

/// Coefficient `k` is `(k+1) f̂(k+1)`; the truncation drops by one.
pub fn derivative(f: &PowerSeries) -> PowerSeries {
    if f.order() == 0 {
        return PowerSeries::build(vec![ZERO], true);
    }
    let c = f.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect();
    PowerSeries::build(c, f.exact)
}

pub fn eval(f: &PowerSeries, z: C) -> C {
    f.eval(z)
}

/// Neumaier-compensated running sum of complex terms.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (s, c) = *acc;
    let t = s + x;
    let c = if s.abs() >= x.abs() { c + ((s - t) + x) } else { c + ((x - t) + s) };
    *acc = (t, c);
}

impl CompensatedSum {
    pub fn add(&mut self, z: C) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> C {
        C::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// `Σ_{k≤K} β_k² conj(ĝ(k)) f̂(k)`, ascending `k`, compensated.
pub fn inner(f: &PowerSeries, g: &PowerSeries, w: &WeightSequence) -> Result<C> {
    let k = f.order().min(g.order());
    let betas = w.betas(k + 1)?;
    let mut acc = CompensatedSum::default();
    for (i, b) in betas.iter().enumerate() {
        acc.add(g.coeffs[i].conj() * f.coeffs[i] * (b * b));
    }
    Ok(acc.value())
}

pub fn norm(f: &PowerSeries, w: &WeightSequence) -> Result<f64> {
    Ok(inner(f, f, w)?.re.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn real(v: &[f64]) -> Vec<C> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    #[test]
    fn multiply_examples() {
        let p = multiply(&PowerSeries::new(real(&[1.0, 1.0, 0.0])), &PowerSeries::new(real(&[1.0, -1.0, 0.0])));
        assert_eq!(p.coeffs(), &real(&[1.0, 0.0, -1.0])[..]);
        let z = PowerSeries::polynomial(&real(&[0.0, 1.0]), 2);
        assert_eq!(multiply(&z, &z).coeffs(), &real(&[0.0, 0.0, 1.0])[..]);
        let inv = multiply(&PowerSeries::geom(c(0.5, 0.0), 20), &PowerSeries::polynomial(&real(&[1.0, -0.5]), 20));
        assert!((inv.coeffs()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(inv.coeffs()[1..].iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn derivative_examples() {
        let d = derivative(&PowerSeries::polynomial(&real(&[2.0, 1.0, 1.0]), 2));
        assert_eq!(d.coeffs(), &real(&[1.0, 2.0])[..]);
        let a = c(0.3, -0.2);
        let g = PowerSeries::geom(a, 30);
        let lhs = derivative(&g);
        let rhs = multiply(&g, &g).scale(a.conj());
        for k in 0..29 {
            assert!((lhs.coeffs()[k] - rhs.coeffs()[k]).norm() < 1e-15);
        }
        assert_eq!(derivative(&PowerSeries::polynomial(&[c(3.0, 0.0)], 0)).coeffs(), &[c(0.0, 0.0)]);
    }

    #[test]
    fn eval_examples() {
        let p = PowerSeries::polynomial(&real(&[2.0, 1.0, 1.0]), 2);
        assert_eq!(p.eval(c(0.0, 0.0)), c(2.0, 0.0));
        assert_eq!(p.eval(c(1.0, 0.0)), c(4.0, 0.0));
        let g = PowerSeries::geom(c(0.5, 0.0), 60);
        assert!((g.eval(c(0.5, 0.0)) - c(4.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inner_examples() {
        let w = WeightSequence::bergman(1.0).unwrap();
        let z3 = PowerSeries::monomial(3, 6);
        let z4 = PowerSeries::monomial(4, 6);
        assert_eq!(inner(&z3, &z4, &w).unwrap(), c(0.0, 0.0));
        let b3 = w.beta(3).unwrap();
        assert!((inner(&z3, &z3, &w).unwrap().re - b3 * b3).abs() < 1e-16);

        let h = WeightSequence::hardy();
        let g = PowerSeries::geom(c(0.5, 0.0), 100);
        assert!((inner(&g, &g, &h).unwrap() - c(4.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn moebius_derivative_norm() {
        // φ'(z) = −(1−t²)/(1−tz)², coefficients −(1−t²)(k+1)t^k
        let t = 0.5;
        let coeffs: Vec<C> = (0..200).map(|k| c(-(1.0 - t * t) * (k as f64 + 1.0) * t.powi(k), 0.0)).collect();
        let d = PowerSeries::new(coeffs);
        let n2 = inner(&d, &d, &WeightSequence::hardy()).unwrap().re;
        assert!((n2 - 5.0 / 3.0).abs() < 1e-10);
        assert!((0.5625f64 * (1.25 / 0.421875) - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn compose_examples() {
        let id = PowerSeries::polynomial(&real(&[0.0, 1.0]), 1);
        let g = PowerSeries::geom(c(0.2, 0.1), 20).scale(c(0.3, 0.0));
        let r = compose(&id, &g, 20).unwrap();
        for k in 0..=20 {
            assert!((r.series.coeffs()[k] - g.coeffs()[k]).norm() < 1e-16);
        }
        assert_eq!(r.tail_bound, 0.0);

        // ((0.3 − z)/(1 − 0.3z))², oracle = square of the factor series
        let phi = PowerSeries::one(40).mul_moebius_factor(c(0.3, 0.0));
        let sq = PowerSeries::polynomial(&real(&[0.0, 0.0, 1.0]), 2);
        let r = compose(&sq, &phi, 40).unwrap();
        let oracle = multiply(&phi, &phi);
        assert!((r.series.coeffs()[0] - c(0.09, 0.0)).norm() < 1e-16);
        for k in 0..=40 {
            assert!((r.series.coeffs()[k] - oracle.coeffs()[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn compose_domain_guard() {
        let f = PowerSeries::geom(c(0.5, 0.0), 20);
        let g = PowerSeries::polynomial(&real(&[0.0, 1.0]), 20);
        assert!(matches!(compose(&f, &g, 20), Err(LabError::Domain(_))));
        let small = g.scale(c(0.5, 0.0));
        let r = compose(&f, &small, 20).unwrap();
        assert!(r.tail_bound > 0.0 && r.tail_bound < 1e-10);
    }

    #[test]
    fn reciprocal_of_geom() {
        let g = PowerSeries::geom(c(0.4, 0.3), 10);
        let r = g.reciprocal().unwrap();
        assert!((r.coeffs()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((r.coeffs()[1] + c(0.4, -0.3)).norm() < 1e-15);
        assert!(r.coeffs()[2..].iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn sample_circle_matches_horner() {
        let p = PowerSeries::new(vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.25, 0.0), c(0.0, -0.3)]);
        let s = sample_circle(p.coeffs(), 0.7, 16);
        for (j, v) in s.iter().enumerate() {
            let z = C::from_polar(0.7, 2.0 * PI * j as f64 / 16.0);
            assert!((v - p.eval(z)).norm() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = PowerSeries::new(vec![c(1.0, -2.0), c(0.5, 0.0)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[1.0,-2.0],[0.5,0.0]]");
        let q: PowerSeries = serde_json::from_str(&s).unwrap();
        assert_eq!(q.coeffs(), p.coeffs());
    }

    fn series(k: usize) -> impl Strategy<Value = PowerSeries> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), k + 1)
            .prop_map(|v| PowerSeries::new(v.into_iter().map(|(a, b)| c(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn multiply_commutes_and_associates(f in series(12), g in series(12), h in series(12)) {
            let fg = multiply(&f, &g);
            let gf = multiply(&g, &f);
            for k in 0..=12 {
                prop_assert!((fg.coeffs()[k] - gf.coeffs()[k]).norm() <= 1e-14);
            }
            let a = multiply(&fg, &h);
            let b = multiply(&f, &multiply(&g, &h));
            for k in 0..=12 {
                prop_assert!((a.coeffs()[k] - b.coeffs()[k]).norm() <= 1e-13);
            }
        }

        #[test]
        fn cauchy_schwarz(f in series(20), g in series(20)) {
            let w = WeightSequence::bergman(1.0).unwrap();
            let fg = inner(&f, &g, &w).unwrap().norm_sqr();
            let ff = inner(&f, &f, &w).unwrap().re;
            let gg = inner(&g, &g, &w).unwrap().re;
            prop_assert!(fg <= ff * gg * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn eval_of_product(f in series(40), g in series(40), re in -0.6f64..0.6, im in -0.6f64..0.6) {
            // exact polynomials: the product carries no truncation tail
            let fp = PowerSeries::polynomial(f.coeffs(), 80);
            let gp = PowerSeries::polynomial(g.coeffs(), 80);
            let z = c(re, im);
            let lhs = multiply(&fp, &gp).eval(z);
            let rhs = fp.eval(z) * gp.eval(z);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn compose_associates(a in series(6), b in series(6), c0 in series(6)) {
            let k = 12;
            let f = PowerSeries::polynomial(a.coeffs(), k);
            let scale = |s: &PowerSeries| {
                let mut v = s.coeffs().to_vec();
                v[0] = C::new(0.0, 0.0);
                PowerSeries::polynomial(&v, k).scale(C::new(0.1, 0.0))
            };
            let g = scale(&b);
            let h = scale(&c0);
            let left = compose(&f, &compose(&g, &h, k).unwrap().series, k).unwrap().series;
            let right = compose(&compose(&f, &g, k).unwrap().series, &h, k).unwrap().series;
            for i in 0..=k {
                prop_assert!((left.coeffs()[i] - right.coeffs()[i]).norm() <= 1e-12);
            }
        }
    }
}
