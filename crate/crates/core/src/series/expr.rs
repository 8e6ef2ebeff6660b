//! Expression trees for functions analytic on the closed disk, with a small
//! prefix grammar:
//!
//! ```text
//! expr  := poly(c0, c1, ...) | blaschke(theta; z1, z2, ...)
//!        | compose(outer, inner) | sum(e, ...) | prod(e, ...)
//!        | scale(c, e) | star(e)
//! c     := complex literal: 1.5, -0.3i, 2-i, 1e-3+4i, i
//! ```
//!
//! `poly` lists coefficients constant term first.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::blaschke::BlaschkeProduct;
use crate::error::{LabError, Result};
use crate::poly::Poly;
use crate::series::{compose, multiply, PowerSeries};

type C = Complex64;

/// Maximal numerator/denominator degree of a rational reduction.
pub const DEGREE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Poly(Vec<C>),
    Blaschke(BlaschkeProduct),
    /// `outer ∘ inner`
    Compose(Box<FunctionSpec>, Box<FunctionSpec>),
    Sum(Vec<FunctionSpec>),
    Product(Vec<FunctionSpec>),
    Scale(C, Box<FunctionSpec>),
    Star(Box<FunctionSpec>),
}

/// `num/den` with the denominator free of zeros on the closed disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    fn polynomial(p: Poly) -> Self {
        Rational { num: p, den: Poly::one() }
    }

    pub fn eval(&self, z: C) -> C {
        self.num.eval(z) / self.den.eval(z)
    }

    /// Numerator of the derivative, `P'Q − PQ'`.
    pub fn derivative_numerator(&self) -> Poly {
        self.num
            .derivative()
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derivative()))
            .trimmed()
    }

    /// `max(deg P, deg Q)`
    pub fn degree(&self) -> usize {
        self.num.degree().max(self.den.degree())
    }

    fn capped(self) -> Result<Self> {
        let r = Rational {
            num: self.num.trimmed(),
            den: self.den.trimmed(),
        };
        let d = r.degree();
        if d > DEGREE_CAP {
            return Err(LabError::DegreeCap {
                degree: d,
                cap: DEGREE_CAP,
            });
        }
        Ok(r)
    }
}

fn pad(p: &Poly, n: usize) -> Vec<C> {
    let mut v = p.0.clone();
    v.resize(n + 1, C::new(0.0, 0.0));
    v
}

impl FunctionSpec {
    pub fn polynomial(coeffs: Vec<C>) -> Self {
        FunctionSpec::Poly(coeffs)
    }

    pub fn compose(outer: FunctionSpec, inner: FunctionSpec) -> Self {
        FunctionSpec::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            FunctionSpec::Poly(_) => true,
            FunctionSpec::Blaschke(_) => false,
            FunctionSpec::Compose(f, g) => f.is_polynomial() && g.is_polynomial(),
            FunctionSpec::Sum(v) | FunctionSpec::Product(v) => v.iter().all(|f| f.is_polynomial()),
            FunctionSpec::Scale(_, f) | FunctionSpec::Star(f) => f.is_polynomial(),
        }
    }

    pub fn eval(&self, z: C) -> C {
        match self {
            FunctionSpec::Poly(c) => c.iter().rev().fold(C::new(0.0, 0.0), |acc, &a| acc * z + a),
            FunctionSpec::Blaschke(b) => b.eval(z),
            FunctionSpec::Compose(f, g) => f.eval(g.eval(z)),
            FunctionSpec::Sum(v) => v.iter().map(|f| f.eval(z)).sum(),
            FunctionSpec::Product(v) => v.iter().map(|f| f.eval(z)).product(),
            FunctionSpec::Scale(s, f) => s * f.eval(z),
            FunctionSpec::Star(f) => f.eval(z.conj()).conj(),
        }
    }

    pub fn eval_with_derivative(&self, z: C) -> (C, C) {
        let zero = C::new(0.0, 0.0);
        match self {
            FunctionSpec::Poly(c) => Poly(c.clone()).eval_with_derivative(z),
            FunctionSpec::Blaschke(b) => b.eval_with_derivative(z),
            FunctionSpec::Compose(f, g) => {
                let (gv, gd) = g.eval_with_derivative(z);
                let (fv, fd) = f.eval_with_derivative(gv);
                (fv, fd * gd)
            }
            FunctionSpec::Sum(v) => v.iter().fold((zero, zero), |(a, b), f| {
                let (x, y) = f.eval_with_derivative(z);
                (a + x, b + y)
            }),
            FunctionSpec::Product(v) => v.iter().fold((C::new(1.0, 0.0), zero), |(a, b), f| {
                let (x, y) = f.eval_with_derivative(z);
                (a * x, b * x + a * y)
            }),
            FunctionSpec::Scale(s, f) => {
                let (x, y) = f.eval_with_derivative(z);
                (s * x, s * y)
            }
            FunctionSpec::Star(f) => {
                let (x, y) = f.eval_with_derivative(z.conj());
                (x.conj(), y.conj())
            }
        }
    }

    /// Reduce to `P/Q`; fails past the degree cap or when `Q` vanishes on the closed disk.
    pub fn rational(&self) -> Result<Rational> {
        let r = self.rational_unchecked()?;
        if r.den.degree() > 0 {
            if let Some(p) = r.den.roots()?.into_iter().find(|p| p.norm() <= 1.0 + 1e-9) {
                return Err(LabError::Domain(format!(
                    "`{self}` has a pole at {} in the closed disk",
                    crate::error::fmt_c(p)
                )));
            }
        }
        Ok(r)
    }

    fn rational_unchecked(&self) -> Result<Rational> {
        let r = match self {
            FunctionSpec::Poly(c) => Rational::polynomial(Poly(c.clone())),
            FunctionSpec::Blaschke(b) => {
                let (num, den) = b.rational();
                Rational { num, den }
            }
            FunctionSpec::Compose(f, g) => {
                let outer = f.rational_unchecked()?;
                let inner = g.rational_unchecked()?;
                let d = outer.degree();
                let (pn, qn) = (pad(&outer.num, d), pad(&outer.den, d));
                let (p, q) = (&inner.num, &inner.den);
                if d * inner.degree() > DEGREE_CAP {
                    return Err(LabError::DegreeCap {
                        degree: d * inner.degree(),
                        cap: DEGREE_CAP,
                    });
                }
                // Σ a_k p^k q^{d−k}
                let mut num = Poly::zero();
                let mut den = Poly::zero();
                for k in 0..=d {
                    let term = p.pow(k).mul(&q.pow(d - k));
                    num = num.add(&term.scale(pn[k]));
                    den = den.add(&term.scale(qn[k]));
                }
                Rational { num, den }
            }
            FunctionSpec::Sum(v) => {
                let mut acc = Rational::polynomial(Poly::zero());
                for f in v {
                    let r = f.rational_unchecked()?;
                    acc = Rational {
                        num: acc.num.mul(&r.den).add(&r.num.mul(&acc.den)),
                        den: acc.den.mul(&r.den),
                    }
                    .capped()?;
                }
                acc
            }
            FunctionSpec::Product(v) => {
                let mut acc = Rational::polynomial(Poly::one());
                for f in v {
                    let r = f.rational_unchecked()?;
                    acc = Rational {
                        num: acc.num.mul(&r.num),
                        den: acc.den.mul(&r.den),
                    }
                    .capped()?;
                }
                acc
            }
            FunctionSpec::Scale(s, f) => {
                let r = f.rational_unchecked()?;
                Rational {
                    num: r.num.scale(*s),
                    den: r.den,
                }
            }
            FunctionSpec::Star(f) => {
                let r = f.rational_unchecked()?;
                Rational {
                    num: r.num.star(),
                    den: r.den.star(),
                }
            }
        };
        r.capped()
    }

    /// Taylor coefficients at 0 through order `k`.
    pub fn taylor(&self, k: usize) -> Result<PowerSeries> {
        Ok(match self {
            FunctionSpec::Poly(c) => PowerSeries::polynomial(c, k),
            FunctionSpec::Blaschke(b) => b.taylor(k),
            FunctionSpec::Compose(f, g) => {
                let inner = g.taylor(k)?;
                compose_taylor(f, &inner, k)?
            }
            FunctionSpec::Sum(v) => {
                let mut acc = PowerSeries::zeros(k);
                for f in v {
                    acc = acc.add(&f.taylor(k)?);
                }
                acc.truncate(k)
            }
            FunctionSpec::Product(v) => {
                let mut acc = PowerSeries::one(k);
                for f in v {
                    acc = multiply(&acc, &f.taylor(k)?);
                }
                acc.truncate(k)
            }
            FunctionSpec::Scale(s, f) => f.taylor(k)?.scale(*s),
            FunctionSpec::Star(f) => f.taylor(k)?.star(),
        })
    }
}

/// Taylor series of `f∘g` from the series of `g`, using exact rational forms of `f`.
fn compose_taylor(f: &FunctionSpec, g: &PowerSeries, k: usize) -> Result<PowerSeries> {
    let one = C::new(1.0, 0.0);
    match f {
        FunctionSpec::Poly(c) => Ok(compose(&PowerSeries::polynomial(c, c.len().max(1) - 1), g, k)?.series),
        FunctionSpec::Blaschke(b) => {
            let mut acc = PowerSeries::one(k).scale(b.phase());
            for &a in b.zeros() {
                let num = PowerSeries::polynomial(&[a], k).sub(g);
                let den = PowerSeries::polynomial(&[one], k).sub(&g.scale(a.conj()));
                acc = multiply(&multiply(&acc, &num), &den.reciprocal()?);
            }
            Ok(acc)
        }
        FunctionSpec::Compose(f2, g2) => {
            let inner = compose_taylor(g2, g, k)?;
            compose_taylor(f2, &inner, k)
        }
        FunctionSpec::Sum(v) => {
            let mut acc = PowerSeries::zeros(k);
            for h in v {
                acc = acc.add(&compose_taylor(h, g, k)?);
            }
            Ok(acc.truncate(k))
        }
        FunctionSpec::Product(v) => {
            let mut acc = PowerSeries::one(k);
            for h in v {
                acc = multiply(&acc, &compose_taylor(h, g, k)?);
            }
            Ok(acc.truncate(k))
        }
        FunctionSpec::Scale(s, h) => Ok(compose_taylor(h, g, k)?.scale(*s)),
        FunctionSpec::Star(_) => {
            let r = f.rational()?;
            let num = compose(&PowerSeries::polynomial(&r.num.0, r.num.0.len() - 1), g, k)?.series;
            let den = compose(&PowerSeries::polynomial(&r.den.0, r.den.0.len() - 1), g, k)?.series;
            Ok(multiply(&num, &den.reciprocal()?))
        }
    }
}

fn fmt_complex(z: C) -> String {
    match (z.re, z.im) {
        (re, im) if im == 0.0 => format!("{re}"),
        (re, im) if re == 0.0 => format!("{im}i"),
        (re, im) if im < 0.0 => format!("{re}{im}i"),
        (re, im) => format!("{re}+{im}i"),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Poly(c) => write!(f, "poly({})", join(c, |z| fmt_complex(*z))),
            FunctionSpec::Blaschke(b) => write!(f, "blaschke({}; {})", b.theta(), join(b.zeros(), |z| fmt_complex(*z))),
            FunctionSpec::Compose(a, b) => write!(f, "compose({a}, {b})"),
            FunctionSpec::Sum(v) => write!(f, "sum({})", join(v, |e| e.to_string())),
            FunctionSpec::Product(v) => write!(f, "prod({})", join(v, |e| e.to_string())),
            FunctionSpec::Scale(s, e) => write!(f, "scale({}, {e})", fmt_complex(*s)),
            FunctionSpec::Star(e) => write!(f, "star({e})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T> {
        Err(LabError::Parse {
            column: self.src[..at].chars().count() + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(ch) = self.src[self.pos..].chars().next() {
            if !ch.is_whitespace() {
                break;
            }
            self.pos += ch.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.err(self.pos, format!("expected `{ch}`, found `{c}`")),
            None => self.err(self.pos, format!("expected `{ch}`, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..].find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(self.src.len() - start);
        if len == 0 {
            return self.err(start, "expected a function name");
        }
        self.pos += len;
        Ok((start, &self.src[start..start + len]))
    }

    fn complex(&mut self) -> Result<C> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-' | 'i')))
            .unwrap_or(self.src.len() - start);
        let text = &self.src[start..start + len];
        self.pos += len;
        match parse_complex(text) {
            Some(z) => Ok(z),
            None if text.is_empty() => self.err(start, "expected a number"),
            None => self.err(start, format!("`{text}` is not a complex number")),
        }
    }

    fn complex_list(&mut self) -> Result<Vec<C>> {
        let mut out = vec![self.complex()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            out.push(self.complex()?);
        }
        Ok(out)
    }

    fn expr_list(&mut self) -> Result<Vec<FunctionSpec>> {
        let mut out = vec![self.expr()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<FunctionSpec> {
        let (at, name) = self.ident()?;
        self.expect('(')?;
        let e = match name {
            "poly" => FunctionSpec::Poly(self.complex_list()?),
            "blaschke" => {
                let t_at = self.pos;
                let theta = self.complex()?;
                if theta.im != 0.0 {
                    return self.err(t_at, "phase must be real");
                }
                self.expect(';')?;
                self.skip_ws();
                let z_at = self.pos;
                let zeros = self.complex_list()?;
                match BlaschkeProduct::new(zeros, theta.re) {
                    Ok(b) => FunctionSpec::Blaschke(b),
                    Err(e) => return self.err(z_at, e.to_string()),
                }
            }
            "compose" => {
                let f = self.expr()?;
                self.expect(',')?;
                let g = self.expr()?;
                FunctionSpec::compose(f, g)
            }
            "sum" => FunctionSpec::Sum(self.expr_list()?),
            "prod" => FunctionSpec::Product(self.expr_list()?),
            "scale" => {
                let s = self.complex()?;
                self.expect(',')?;
                FunctionSpec::Scale(s, Box::new(self.expr()?))
            }
            "star" => FunctionSpec::Star(Box::new(self.expr()?)),
            other => return self.err(at, format!("unknown function `{other}`")),
        };
        self.expect(')')?;
        Ok(e)
    }
}

/// `a`, `bi`, `a+bi`, `a-bi`, with `i` alone meaning `1i`.
fn parse_complex(s: &str) -> Option<C> {
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| C::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&j| matches!(bytes[j], b'+' | b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let imag = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => t.parse().ok(),
        }
    };
    match split {
        Some(j) => Some(C::new(body[..j].parse().ok()?, imag(&body[j..])?)),
        None => Some(C::new(0.0, imag(body)?)),
    }
}

impl serde::Serialize for FunctionSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FunctionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for FunctionSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return p.err(p.pos, "trailing input");
        }
        Ok(e)
    }
}

/// Taylor expansion of a spec; see [`FunctionSpec::taylor`].
pub fn taylor(spec: &FunctionSpec, k: usize) -> Result<PowerSeries> {
    spec.taylor(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.5"), Some(c(1.5, 0.0)));
        assert_eq!(parse_complex("-0.3i"), Some(c(0.0, -0.3)));
        assert_eq!(parse_complex("2-i"), Some(c(2.0, -1.0)));
        assert_eq!(parse_complex("1e-3+4i"), Some(c(1e-3, 4.0)));
        assert_eq!(parse_complex("i"), Some(c(0.0, 1.0)));
        assert_eq!(parse_complex("-2e+1-1.5e-1i"), Some(c(-20.0, -0.15)));
        assert_eq!(parse_complex("1..2"), None);
    }

    #[test]
    fn parse_and_print() {
        let s = "compose(poly(0, 1, 0, 2), blaschke(0; 0, 0.4))";
        let f: FunctionSpec = s.parse().unwrap();
        assert_eq!(f.to_string(), s);
        let g: FunctionSpec = "sum(scale(0.5-2i, star(poly(i,1+i))), prod(poly(1), blaschke(1.5; 0.3i)))".parse().unwrap();
        assert_eq!(g.to_string().parse::<FunctionSpec>().unwrap(), g);
    }

    #[test]
    fn parse_errors_carry_columns() {
        match "poly(1, x)".parse::<FunctionSpec>() {
            Err(LabError::Parse { column, .. }) => assert_eq!(column, 9),
            other => panic!("{other:?}"),
        }
        match "blaschke(0; 1.2)".parse::<FunctionSpec>() {
            Err(LabError::Parse { column, .. }) => assert_eq!(column, 13),
            other => panic!("{other:?}"),
        }
        assert!("frob(1)".parse::<FunctionSpec>().is_err());
        assert!("poly(1) x".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn taylor_examples() {
        let p: FunctionSpec = "poly(2,1,1)".parse().unwrap();
        assert_eq!(p.taylor(4).unwrap().coeffs(), &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s: FunctionSpec = "star(poly(i, 1+i))".parse().unwrap();
        assert_eq!(s.taylor(1).unwrap().coeffs(), &[c(0.0, -1.0), c(1.0, -1.0)]);
        let b: FunctionSpec = "blaschke(0; 0.5)".parse().unwrap();
        let t = b.taylor(2).unwrap();
        for (x, y) in t.coeffs().iter().zip([0.5, -0.75, -0.375]) {
            assert!((x - c(y, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn composed_taylor_matches_pointwise() {
        let f: FunctionSpec = "compose(poly(0,1,0,2), prod(poly(0,1), blaschke(0; 0.4)))".parse().unwrap();
        let t = f.taylor(200).unwrap();
        let z = c(0.2, 0.0);
        // pointwise oracle: g(0.2) = 0.2·(0.4−0.2)/(1−0.08), f(g) = g + 2g³
        let g = 0.2 * 0.2 / 0.92;
        let expect = g + 2.0 * g * g * g;
        assert!((t.eval(z) - c(expect, 0.0)).norm() < 1e-13);
        assert!((f.eval(z) - c(expect, 0.0)).norm() < 1e-15);

        let bb: FunctionSpec = "compose(blaschke(0.3; 0.2+0.1i), blaschke(0; 0.5, -0.3i))".parse().unwrap();
        let t = bb.taylor(300).unwrap();
        for z in [c(0.3, 0.4), c(-0.6, 0.1)] {
            assert!((t.eval(z) - bb.eval(z)).norm() < 1e-12);
        }
    }

    #[test]
    fn rational_reduction() {
        let f: FunctionSpec = "compose(poly(0,1,0,2), blaschke(0; 0, 0.4))".parse().unwrap();
        let r = f.rational().unwrap();
        assert_eq!(r.degree(), 6);
        for z in [c(0.1, 0.2), c(-0.5, 0.5)] {
            assert!((r.eval(z) - f.eval(z)).norm() < 1e-13);
        }
        let bad: FunctionSpec = "compose(blaschke(0; 0.5), poly(0, 3))".parse().unwrap();
        assert!(matches!(bad.rational(), Err(LabError::Domain(_))));
        let big = FunctionSpec::Poly(vec![c(1.0, 0.0); 66]);
        assert!(matches!(big.rational(), Err(LabError::DegreeCap { .. })));
    }

    #[test]
    fn derivative_of_tree() {
        let f: FunctionSpec = "sum(star(compose(blaschke(0.2; 0.3i, 0.1), poly(0, 0.5, 0.2i))), prod(poly(1, 2), blaschke(0; -0.4)))"
            .parse()
            .unwrap();
        let z = c(0.15, -0.25);
        let h = 1e-6;
        let fd = (f.eval(z + h) - f.eval(z - h)) / (2.0 * h);
        assert!((f.eval_with_derivative(z).1 - fd).norm() < 1e-8);
        let r = f.rational().unwrap();
        assert!((r.eval(z) - f.eval(z)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn complex_literal_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = c(re, im);
            prop_assert_eq!(parse_complex(&fmt_complex(z)), Some(z));
        }
    }
}
