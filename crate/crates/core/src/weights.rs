//! Weight sequences `w_k > 0` and the moment sequence `β_k = w_1 ⋯ w_k`
//! that define a weighted Hardy space `H²_β` with `‖z^k‖ = β_k`.
//!
//! Presets carry closed-form weights; their `β` table is extended lazily
//! behind a lock and is therefore shareable across threads.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Indices above this use `exp(Σ ln w_i)` instead of the running product.
const LOG_SPACE_FROM: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Hardy,
    Bergman { alpha: f64 },
    PolyGrowth { m: f64 },
    /// `w_k = (k+2)/(k+1) · exp(ln²(k+3) − ln²(k+2))`
    Nln,
    /// `w_k = values[k-1]`, read from a CSV file or given inline.
    Explicit { values: Arc<Vec<f64>>, source: Option<String> },
    Reciprocal(Box<WeightKind>),
}

impl WeightKind {
    fn weight(&self, k: usize) -> Result<f64> {
        debug_assert!(k >= 1);
        let kf = k as f64;
        Ok(match self {
            WeightKind::Hardy => 1.0,
            WeightKind::Bergman { alpha } => ((kf + 1.0) / (kf + 2.0 * alpha + 1.0)).sqrt(),
            WeightKind::PolyGrowth { m } => (kf + m + 1.0) / (kf + 1.0),
            WeightKind::Nln => (kf + 2.0) / (kf + 1.0) * nln_log_increment(k).exp(),
            WeightKind::Explicit { values, .. } => *values.get(k - 1).ok_or(LabError::TruncationRange {
                index: k,
                len: values.len(),
            })?,
            WeightKind::Reciprocal(inner) => 1.0 / inner.weight(k)?,
        })
    }

    /// `(k+1)(w_k − 1)` evaluated without cancellation where a closed form exists.
    fn growth_term(&self, k: usize) -> Result<f64> {
        let kf = k as f64;
        Ok(match self {
            WeightKind::Hardy => 0.0,
            WeightKind::Bergman { alpha } => {
                let r = ((kf + 1.0) / (kf + 2.0 * alpha + 1.0)).sqrt();
                let r2m1 = -2.0 * alpha / (kf + 2.0 * alpha + 1.0);
                (kf + 1.0) * r2m1 / (r + 1.0)
            }
            WeightKind::PolyGrowth { m } => *m,
            WeightKind::Nln => (kf + 2.0) * nln_log_increment(k).exp_m1() + 1.0,
            WeightKind::Reciprocal(inner) => {
                let w = inner.weight(k)?;
                -inner.growth_term(k)? / w
            }
            WeightKind::Explicit { .. } => (kf + 1.0) * (self.weight(k)? - 1.0),
        })
    }

    fn asymptotic(&self) -> Asymptotic {
        match self {
            WeightKind::Hardy => Asymptotic::Power(0.0),
            WeightKind::Bergman { alpha } => Asymptotic::Power(-alpha),
            WeightKind::PolyGrowth { m } => Asymptotic::Power(*m),
            WeightKind::Nln => Asymptotic::LogSquare(1),
            WeightKind::Explicit { .. } => Asymptotic::Unknown,
            WeightKind::Reciprocal(inner) => match inner.asymptotic() {
                Asymptotic::Power(p) => Asymptotic::Power(-p),
                Asymptotic::LogSquare(s) => Asymptotic::LogSquare(-s),
                Asymptotic::Unknown => Asymptotic::Unknown,
            },
        }
    }

    fn certified_growth(&self) -> Option<GrowthClass> {
        match self {
            WeightKind::Hardy | WeightKind::Bergman { .. } | WeightKind::PolyGrowth { .. } => {
                Some(GrowthClass::Polynomial)
            }
            WeightKind::Nln => Some(GrowthClass::Intermediate),
            WeightKind::Explicit { .. } => None,
            WeightKind::Reciprocal(inner) => inner.certified_growth(),
        }
    }
}

/// `ln²(k+3) − ln²(k+2)` as a product of a `ln1p` and a sum.
fn nln_log_increment(k: usize) -> f64 {
    let a = (k as f64 + 3.0).ln();
    let b = (k as f64 + 2.0).ln();
    (1.0 / (k as f64 + 2.0)).ln_1p() * (a + b)
}

/// Leading-order behaviour of `β_k` for presets.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Asymptotic {
    /// `β_k ~ c k^p`
    Power(f64),
    /// `β_k ~ exp(s ln² k)` up to polynomial factors
    LogSquare(i8),
    Unknown,
}

#[derive(Debug, Default)]
struct BetaCache {
    /// `w[k]` for `k ≥ 1`; `w[0]` is a placeholder.
    w: Vec<f64>,
    beta: Vec<f64>,
    ln_beta: Vec<f64>,
}

/// A weight sequence with a lazily extended `β` table.
#[derive(Debug, Clone)]
pub struct WeightSequence {
    kind: WeightKind,
    cache: Arc<RwLock<BetaCache>>,
}

impl PartialEq for WeightSequence {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl WeightSequence {
    pub fn new(kind: WeightKind) -> Result<Self> {
        match &kind {
            WeightKind::Bergman { alpha } if !(*alpha >= 0.0 && alpha.is_finite()) => {
                return Err(LabError::InvalidWeights(format!("bergman alpha must be ≥ 0, got {alpha}")))
            }
            WeightKind::PolyGrowth { m } if !(*m > 0.0 && m.is_finite()) => {
                return Err(LabError::InvalidWeights(format!("polygrowth M must be > 0, got {m}")))
            }
            WeightKind::Explicit { values, .. } => {
                if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                    return Err(LabError::InvalidWeights(format!("w_{} = {v} is not a positive number", i + 1)));
                }
            }
            _ => {}
        }
        Ok(WeightSequence {
            kind,
            cache: Arc::new(RwLock::new(BetaCache {
                w: vec![1.0],
                beta: vec![1.0],
                ln_beta: vec![0.0],
            })),
        })
    }

    pub fn hardy() -> Self {
        Self::new(WeightKind::Hardy).unwrap()
    }

    pub fn bergman(alpha: f64) -> Result<Self> {
        Self::new(WeightKind::Bergman { alpha })
    }

    pub fn polygrowth(m: f64) -> Result<Self> {
        Self::new(WeightKind::PolyGrowth { m })
    }

    pub fn nln() -> Self {
        Self::new(WeightKind::Nln).unwrap()
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(WeightKind::Explicit {
            values: Arc::new(values),
            source: None,
        })
    }

    /// One positive decimal per line; line `k` holds `w_k`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::InvalidWeights(format!("{}: {e}", path.display())))?;
        let mut values = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let field = line.trim().trim_matches('"');
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                LabError::InvalidWeights(format!("{}:{}: `{field}` is not a number", path.display(), line_no + 1))
            })?;
            values.push(v);
        }
        Self::new(WeightKind::Explicit {
            values: Arc::new(values),
            source: Some(path.display().to_string()),
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Preset id in the config syntax, e.g. `bergman:alpha=1`.
    pub fn id(&self) -> String {
        self.to_string()
    }

    fn ensure(&self, k: usize) -> Result<()> {
        if self.cache.read().expect("weight cache poisoned").w.len() > k {
            return Ok(());
        }
        let mut c = self.cache.write().expect("weight cache poisoned");
        while c.w.len() <= k {
            let i = c.w.len();
            let w = self.kind.weight(i)?;
            let beta = if i <= LOG_SPACE_FROM { c.beta[i - 1] * w } else { f64::NAN };
            let ln_beta = c.ln_beta[i - 1] + w.ln();
            c.w.push(w);
            c.beta.push(beta);
            c.ln_beta.push(ln_beta);
        }
        Ok(())
    }

    /// Pre-extend the cache through index `k`.
    pub fn extend_to(&self, k: usize) -> Result<()> {
        self.ensure(k)
    }

    /// `w_k` for `k ≥ 1`.
    pub fn w(&self, k: usize) -> Result<f64> {
        assert!(k >= 1, "weights are indexed from 1");
        self.ensure(k)?;
        Ok(self.cache.read().expect("weight cache poisoned").w[k])
    }

    /// `β_k = ∏_{i≤k} w_i`, `β_0 = 1`.
    pub fn beta(&self, k: usize) -> Result<f64> {
        self.ensure(k)?;
        let c = self.cache.read().expect("weight cache poisoned");
        Ok(if k <= LOG_SPACE_FROM { c.beta[k] } else { c.ln_beta[k].exp() })
    }

    pub fn ln_beta(&self, k: usize) -> Result<f64> {
        self.ensure(k)?;
        Ok(self.cache.read().expect("weight cache poisoned").ln_beta[k])
    }

    /// `β_0, …, β_{n-1}`.
    pub fn betas(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        self.ensure(n - 1)?;
        let c = self.cache.read().expect("weight cache poisoned");
        Ok((0..n)
            .map(|k| if k <= LOG_SPACE_FROM { c.beta[k] } else { c.ln_beta[k].exp() })
            .collect())
    }

    /// `(k+1)(w_k − 1)`
    pub fn growth_term(&self, k: usize) -> Result<f64> {
        self.kind.growth_term(k)
    }

    /// The sequence `1/w_k`, whose moments are `1/β_k`.
    pub fn dual(&self) -> WeightSequence {
        let kind = match &self.kind {
            WeightKind::Reciprocal(inner) => (**inner).clone(),
            other => WeightKind::Reciprocal(Box::new(other.clone())),
        };
        WeightSequence::new(kind).expect("reciprocal of a valid sequence is valid")
    }

    pub fn growth_classify(&self, probe_limit: usize) -> Result<GrowthReport> {
        growth_classify(self, probe_limit)
    }
}

pub fn beta(w: &WeightSequence, k: usize) -> Result<f64> {
    w.beta(k)
}

pub fn dual_weights(w: &WeightSequence) -> WeightSequence {
    w.dual()
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Hardy => write!(f, "hardy"),
            WeightKind::Bergman { alpha } => write!(f, "bergman:alpha={alpha}"),
            WeightKind::PolyGrowth { m } => write!(f, "polygrowth:M={m}"),
            WeightKind::Nln => write!(f, "nln"),
            WeightKind::Explicit { source: Some(p), .. } => write!(f, "explicit:path={p}"),
            WeightKind::Explicit { values, .. } => write!(f, "explicit:len={}", values.len()),
            WeightKind::Reciprocal(inner) => write!(f, "reciprocal:{inner}"),
        }
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

fn parse_kind(s: &str) -> Result<WeightKind> {
    let bad = |msg: String| LabError::InvalidWeights(msg);
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("reciprocal:") {
        return Ok(WeightKind::Reciprocal(Box::new(parse_kind(rest)?)));
    }
    let (name, args) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let param = |key: &str| -> Result<f64> {
        let args = args.ok_or_else(|| bad(format!("`{name}` needs `{key}=<value>`")))?;
        let (k, v) = args.split_once('=').ok_or_else(|| bad(format!("expected `{key}=<value>` in `{s}`")))?;
        if k.trim() != key {
            return Err(bad(format!("unknown parameter `{}` for `{name}`", k.trim())));
        }
        v.trim().parse().map_err(|_| bad(format!("`{}` is not a number", v.trim())))
    };
    match name {
        "hardy" if args.is_none() => Ok(WeightKind::Hardy),
        "nln" if args.is_none() => Ok(WeightKind::Nln),
        "bergman" => Ok(WeightKind::Bergman { alpha: param("alpha")? }),
        "polygrowth" => Ok(WeightKind::PolyGrowth { m: param("M")? }),
        "explicit" => {
            let args = args.ok_or_else(|| bad("`explicit` needs `path=<file>`".into()))?;
            let path = args
                .strip_prefix("path=")
                .ok_or_else(|| bad(format!("expected `path=<file>` in `{s}`")))?;
            Ok(WeightSequence::from_csv(Path::new(path))?.kind)
        }
        _ => Err(bad(format!("unknown weight preset `{s}`"))),
    }
}

impl FromStr for WeightSequence {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        WeightSequence::new(parse_kind(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthClass {
    Polynomial,
    Intermediate,
    EmpiricalUndetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub weights: String,
    pub probe_limit: usize,
    /// `max_{1≤k≤K} (k+1)|w_k − 1|`
    pub sup_val: f64,
    /// Least-squares slope of `(k+1)(w_k − 1)` against `log10 k` over `[K/10, K]`.
    pub tail_trend: f64,
    pub classification: GrowthClass,
    pub certified: bool,
}

pub fn growth_classify(w: &WeightSequence, probe_limit: usize) -> Result<GrowthReport> {
    assert!(probe_limit >= 10, "probe limit must be at least 10");
    let terms: Vec<f64> = (1..=probe_limit).map(|k| w.growth_term(k)).collect::<Result<_>>()?;
    let sup_val = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);

    let lo = (probe_limit / 10).max(1);
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in lo..=probe_limit {
        let x = (k as f64).log10();
        let y = terms[k - 1];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    let denom = n * sxx - sx * sx;
    let tail_trend = if denom.abs() > 0.0 { (n * sxy - sx * sy) / denom } else { 0.0 };

    let (classification, certified) = match w.kind.certified_growth() {
        Some(c) => (c, true),
        None => (GrowthClass::EmpiricalUndetermined, false),
    };
    Ok(GrowthReport {
        weights: w.id(),
        probe_limit,
        sup_val,
        tail_trend,
        classification,
        certified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// `min_{k≤K} β'_k/β_k`
    pub k1: f64,
    /// `max_{k≤K} β'_k/β_k`
    pub k2: f64,
    pub analytic: bool,
}

/// Compare `H²_β` and `H²_β'` through the ratio `β'_k / β_k` on `0..=K`.
///
/// Presets decide by their known asymptotics; explicit sequences fall back
/// to an empirical test (ratio settled within 1% over the upper half of the
/// probe and spread below `1e3`), flagged by `analytic = false`.
pub fn equivalent(w: &WeightSequence, w2: &WeightSequence, probe_limit: usize) -> Result<EquivalenceReport> {
    assert!(probe_limit >= 1);
    let mut k1 = f64::INFINITY;
    let mut k2 = 0.0f64;
    let mut ratios = Vec::with_capacity(probe_limit + 1);
    for k in 0..=probe_limit {
        let r = (w2.ln_beta(k)? - w.ln_beta(k)?).exp();
        k1 = k1.min(r);
        k2 = k2.max(r);
        ratios.push(r);
    }
    let (a, b) = (w.kind.asymptotic(), w2.kind.asymptotic());
    let (equivalent, analytic) = match (a, b) {
        (Asymptotic::Power(p), Asymptotic::Power(q)) => ((p - q).abs() < 1e-12, true),
        (Asymptotic::LogSquare(s), Asymptotic::LogSquare(t)) => (s == t && w.kind == w2.kind, true),
        (Asymptotic::Unknown, _) | (_, Asymptotic::Unknown) => {
            let half = ratios[probe_limit / 2];
            let last = ratios[probe_limit];
            ((last / half - 1.0).abs() < 1e-2 && k2 / k1 < 1e3 && k1 > 0.0, false)
        }
        _ => (false, true),
    };
    Ok(EquivalenceReport {
        equivalent,
        k1,
        k2,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardy_beta_is_one() {
        assert_eq!(WeightSequence::hardy().beta(7).unwrap(), 1.0);
    }

    #[test]
    fn bergman_first_moment() {
        let w = WeightSequence::bergman(1.0).unwrap();
        assert!((w.beta(1).unwrap() - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nln_first_moment() {
        let w = WeightSequence::nln();
        let expect = 1.5 * ((4f64).ln().powi(2) - (3f64).ln().powi(2)).exp();
        assert!((w.beta(1).unwrap() - expect).abs() < 1e-13);
        assert!((w.beta(1).unwrap() - 3.06596).abs() < 1e-4);
    }

    #[test]
    fn explicit_list_exhausted() {
        let w = WeightSequence::explicit(vec![1.0, 2.0]).unwrap();
        assert_eq!(w.beta(2).unwrap(), 2.0);
        assert!(matches!(w.beta(3), Err(LabError::TruncationRange { index: 3, len: 2 })));
    }

    #[test]
    fn explicit_rejects_nonpositive() {
        assert!(WeightSequence::explicit(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn dual_of_bergman() {
        let w = WeightSequence::bergman(1.0).unwrap().dual();
        assert!((w.w(1).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(WeightSequence::hardy().dual().dual(), WeightSequence::hardy());
    }

    #[test]
    fn parse_presets() {
        for id in ["hardy", "bergman:alpha=1", "polygrowth:M=2", "nln", "reciprocal:nln"] {
            let w: WeightSequence = id.parse().unwrap();
            assert_eq!(w.id(), id);
        }
        assert!("bergman:beta=1".parse::<WeightSequence>().is_err());
        assert!("sobolev".parse::<WeightSequence>().is_err());
    }

    #[test]
    fn growth_hardy_certified() {
        let r = WeightSequence::hardy().growth_classify(1000).unwrap();
        assert_eq!(r.sup_val, 0.0);
        assert_eq!(r.classification, GrowthClass::Polynomial);
        assert!(r.certified);
    }

    #[test]
    fn growth_bergman_two() {
        let r = WeightSequence::bergman(2.0).unwrap().growth_classify(100_000).unwrap();
        assert!(r.sup_val < 2.0 && r.sup_val > 1.99, "{}", r.sup_val);
        assert_eq!(r.classification, GrowthClass::Polynomial);
    }

    #[test]
    fn growth_nln_at_ten_thousand() {
        let w = WeightSequence::nln();
        let r = w.growth_classify(10_000).unwrap();
        // direct evaluation of the weight formula
        let k = 10_000f64;
        let direct = (k + 1.0) * ((k + 2.0) / (k + 1.0) * ((k + 3.0).ln().powi(2) - (k + 2.0).ln().powi(2)).exp() - 1.0);
        assert!((w.growth_term(10_000).unwrap() - direct).abs() < 1e-6);
        assert!((direct - 19.42).abs() < 0.05);
        assert!((r.sup_val - direct).abs() < 1e-6);
        assert_eq!(r.classification, GrowthClass::Intermediate);
        assert!(r.tail_trend > 4.0);
        let dual = w.dual().growth_classify(1000).unwrap();
        assert_eq!(dual.classification, GrowthClass::Intermediate);
    }

    #[test]
    fn explicit_growth_is_empirical() {
        let w = WeightSequence::explicit(vec![1.0; 50]).unwrap();
        let r = w.growth_classify(20).unwrap();
        assert_eq!(r.classification, GrowthClass::EmpiricalUndetermined);
        assert!(!r.certified);
    }

    #[test]
    fn equivalence_cases() {
        let h = WeightSequence::hardy();
        let r = equivalent(&h, &h, 100).unwrap();
        assert!(r.equivalent && r.k1 == 1.0 && r.k2 == 1.0);

        // β̃_k = (k+2)/2 against the dual Bergman moments √((k+2)(k+3)/6)
        let p1 = WeightSequence::polygrowth(1.0).unwrap();
        let db = WeightSequence::bergman(1.0).unwrap().dual();
        let r = equivalent(&db, &p1, 100_000).unwrap();
        assert!(r.equivalent);
        let ratio = (p1.ln_beta(100_000).unwrap() - db.ln_beta(100_000).unwrap()).exp();
        assert!((ratio - 6f64.sqrt() / 2.0).abs() < 1e-4);

        let b1 = WeightSequence::bergman(1.0).unwrap();
        assert!(!equivalent(&b1, &p1, 1000).unwrap().equivalent);

        let small = equivalent(&h, &WeightSequence::nln(), 100).unwrap();
        let big = equivalent(&h, &WeightSequence::nln(), 1000).unwrap();
        assert!(!big.equivalent);
        assert!(big.k2 / big.k1 > small.k2 / small.k1);
    }

    #[test]
    fn log_space_switch_is_continuous() {
        let w = WeightSequence::bergman(1.0).unwrap();
        let b = w.beta(LOG_SPACE_FROM).unwrap();
        let b1 = w.beta(LOG_SPACE_FROM + 1).unwrap();
        let expect = b * w.w(LOG_SPACE_FROM + 1).unwrap();
        assert!((b1 / expect - 1.0).abs() < 1e-11);
    }
}
