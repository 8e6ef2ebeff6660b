//! Invariant suite over all modules, run by `bundle-lab verify`.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blaschke::{compose_blaschke, solve_fiber, BlaschkeProduct};
use crate::classify::{jordan, kaplansky, similar};
use crate::error::Result;
use crate::frames::{self, build_frame, claim_bound, claim_norm, gram, gram_bounds, kernel_matrix, Normalization};
use crate::geometry::{winding, zero_count};
use crate::linalg;
use crate::monodromy::{decompose, monodromy_generators};
use crate::operators::{calculus_matrix, commutant_transport_check, mult_matrix, shift_matrix};
use crate::series::{inner, multiply, FunctionSpec, PowerSeries};
use crate::weights::{growth_classify, WeightSequence};

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Wall time; left out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

type Outcome = Result<(bool, String)>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn disk_point(r: &mut ChaCha8Rng, radius: f64) -> C {
    C::from_polar(radius * r.random::<f64>().sqrt(), std::f64::consts::TAU * r.random::<f64>())
}

fn presets() -> Vec<WeightSequence> {
    vec![
        WeightSequence::hardy(),
        WeightSequence::bergman(1.0).unwrap(),
        WeightSequence::polygrowth(2.0).unwrap(),
        WeightSequence::nln(),
    ]
}

fn bp(zeros: &[C]) -> BlaschkeProduct {
    BlaschkeProduct::new(zeros.to_vec(), 0.0).unwrap()
}

fn le(x: f64, tol: f64) -> (bool, String) {
    (x < tol, format!("{x:.3e} (tol {tol:.0e})"))
}

fn beta_multiplicative() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        for k in 1..=2000 {
            let r = w.beta(k)? / (w.beta(k - 1)? * w.w(k)?) - 1.0;
            worst = worst.max(r.abs());
        }
    }
    Ok(le(worst, 4.0 * f64::EPSILON))
}

fn bergman_sup() -> Outcome {
    let g = growth_classify(&WeightSequence::bergman(1.0)?, 10_000)?;
    Ok(le((g.sup_val - 1.0).abs(), 1e-2))
}

fn dual_involution() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        let dd = w.dual().dual();
        for k in 1..=500 {
            let (a, b) = (w.w(k)?, dd.w(k)?);
            worst = worst.max((a - b).abs() / (a.abs() * f64::EPSILON));
        }
    }
    Ok((worst <= 2.0, format!("{worst} ulps")))
}

fn polygrowth_bounds() -> Outcome {
    for m in [0.5, 1.0, 3.0] {
        let w = WeightSequence::polygrowth(m)?;
        for k in 1..=1000 {
            let kf = k as f64;
            let x = w.w(k)?;
            if x < (kf + 1.0) / (kf + m + 1.0) || x > (kf + m + 1.0) / (kf + 1.0) {
                return Ok((false, format!("M = {m}, k = {k}, w_k = {x}")));
            }
        }
    }
    Ok((true, "M ∈ {0.5, 1, 3}, k ≤ 1000".into()))
}

fn random_series(r: &mut ChaCha8Rng, len: usize) -> PowerSeries {
    let v: Vec<C> = (0..len).map(|_| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect();
    PowerSeries::polynomial(&v, len + 8)
}

fn multiply_laws() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (f, g, h) = (random_series(&mut r, 6), random_series(&mut r, 5), random_series(&mut r, 4));
        let fg = multiply(&f, &g);
        let gf = multiply(&g, &f);
        let a = multiply(&fg, &h);
        let b = multiply(&f, &multiply(&g, &h));
        for k in 0..fg.coeffs().len().min(gf.coeffs().len()) {
            worst = worst.max((fg.coeffs()[k] - gf.coeffs()[k]).norm());
        }
        for k in 0..a.coeffs().len().min(b.coeffs().len()) {
            worst = worst.max((a.coeffs()[k] - b.coeffs()[k]).norm());
        }
        let z = disk_point(&mut r, 0.9);
        worst = worst.max((fg.eval(z) - f.eval(z) * g.eval(z)).norm());
    }
    Ok(le(worst, 1e-13))
}

fn cauchy_schwarz() -> Outcome {
    let mut r = rng(12);
    for w in presets() {
        for _ in 0..20 {
            let (f, g) = (random_series(&mut r, 12), random_series(&mut r, 12));
            let fg = inner(&f, &g, &w)?.norm_sqr();
            let ff = inner(&f, &f, &w)?.re;
            let gg = inner(&g, &g, &w)?.re;
            if fg > ff * gg * (1.0 + 1e-12) {
                return Ok((false, format!("{} : {fg} > {}", w.id(), ff * gg)));
            }
        }
    }
    Ok((true, "80 random pairs".into()))
}

fn blaschke_modulus() -> Outcome {
    let b = bp(&[c(0.0, 0.0), c(0.5, 0.0), c(-0.3, 0.6)]);
    let worst = (0..1024)
        .map(|k| (b.eval(C::from_polar(1.0, std::f64::consts::TAU * k as f64 / 1024.0)).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(le(worst, 1e-10))
}

fn blaschke_fiber_count() -> Outcome {
    let mut r = rng(13);
    let b = bp(&[c(0.1, 0.2), c(-0.5, 0.1), c(0.3, -0.6)]);
    for _ in 0..20 {
        let w = disk_point(&mut r, 0.95);
        let n = solve_fiber(&FunctionSpec::Blaschke(b.clone()), w)?.count();
        if n != 3 {
            return Ok((false, format!("{n} points over {w}")));
        }
    }
    Ok((true, "20 random ω".into()))
}

fn blaschke_composition() -> Outcome {
    let mut r = rng(14);
    let b1 = bp(&[c(0.0, 0.0), c(0.4, -0.2)]);
    let b2 = bp(&[c(0.2, 0.3), c(-0.6, 0.0)]);
    let b = compose_blaschke(&b1, &b2)?;
    let worst = (0..50)
        .map(|_| {
            let z = disk_point(&mut r, 1.0);
            (b.eval(z) - b1.eval(b2.eval(z))).norm()
        })
        .fold(0.0, f64::max);
    Ok(le(worst, 1e-10))
}

fn blaschke_star() -> Outcome {
    let b = bp(&[c(0.1, 0.2), c(-0.5, 0.3)]);
    let s = b.star();
    let ok = s.order() == b.order()
        && b.zeros().iter().all(|z| s.zeros().iter().any(|y| (y - z.conj()).norm() < 1e-14));
    Ok((ok, format!("order {}", s.order())))
}

fn shift_inverts_z() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        let s = shift_matrix(&w, 64)?;
        let z = mult_matrix(&PowerSeries::monomial(1, 1), &w, 64)?;
        let p = &s.entries * &z.entries;
        // the last column of M_z leaves the truncation
        worst = worst.max(linalg::identity_deviation(&p, 63));
    }
    // β_j/β_{j+1}·β_{j+1}/β_j rounds to within one ulp of 1
    Ok((worst <= 2.0 * f64::EPSILON, format!("{worst:e}")))
}

fn calculus_multiplicative() -> Outcome {
    let w = WeightSequence::bergman(1.0)?;
    let h1 = PowerSeries::polynomial(&[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.25)], 64);
    let h2 = PowerSeries::polynomial(&[c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.0)], 64);
    let a = calculus_matrix(&multiply(&h1, &h2), &w, 64)?;
    let b = &calculus_matrix(&h1, &w, 64)?.entries * &calculus_matrix(&h2, &w, 64)?.entries;
    Ok(le(linalg::max_abs_diff(&a.entries, &b, 56, 56), 1e-12))
}

fn mult_support() -> Outcome {
    let w = WeightSequence::polygrowth(2.0)?;
    for f0 in [c(0.0, 0.0), c(0.7, 0.0)] {
        let f = PowerSeries::polynomial(&[f0, c(1.0, 0.0), c(0.5, 0.5)], 16);
        let m = mult_matrix(&f, &w, 16)?;
        let diag_zero = (0..16).all(|i| m.entries[(i, i)].norm() == 0.0);
        let upper_zero = (0..16).all(|i| (i + 1..16).all(|j| m.entries[(i, j)].norm() == 0.0));
        if !upper_zero || diag_zero != (f0.norm() == 0.0) {
            return Ok((false, format!("f̂(0) = {f0}")));
        }
    }
    Ok((true, "strictly lower iff f̂(0) = 0".into()))
}

fn moebius_left_inverse() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        for a in [c(0.5, 0.0), c(-0.2, 0.6)] {
            let r = crate::operators::left_inverse_check(&bp(&[a]), &w, 128)?;
            worst = worst.max(r.deviation);
        }
    }
    Ok(le(worst, 1e-10))
}

fn commutant_transport() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        worst = worst.max(commutant_transport_check(&w, 64)?.max_deviation);
    }
    Ok(le(worst, 1e-12))
}

fn hardy_orthogonality() -> Outcome {
    let zeros = [c(0.0, 0.0), c(0.5, 0.0), c(-0.2, 0.4)];
    let f = build_frame(&bp(&zeros), &WeightSequence::hardy(), 20, 256)?.with_normalization(Normalization::Raw);
    let g = gram(&f)?;
    let a = kernel_matrix(&zeros)?.a;
    let m = zeros.len();
    let mut worst = 0.0f64;
    for r in 0..g.nrows() {
        for s in 0..g.ncols() {
            let want = if r / m == s / m { a[(s % m, r % m)] } else { c(0.0, 0.0) };
            worst = worst.max((g[(r, s)] - want).norm());
        }
    }
    Ok(le(worst, 1e-8))
}

fn identity_frame_bounds() -> Outcome {
    let mut worst = 0.0f64;
    for w in presets() {
        let (c1, c2, _) = gram_bounds(&build_frame(&BlaschkeProduct::identity(), &w, 40, 128)?)?;
        worst = worst.max((c1 - 1.0).abs()).max((c2 - 1.0).abs());
    }
    Ok(le(worst, 1e-12))
}

fn moebius_pairing() -> Outcome {
    let mut worst = 0.0f64;
    for w in [WeightSequence::hardy(), WeightSequence::bergman(1.0)?] {
        worst = worst.max(frames::moebius_duality_check(c(0.3, 0.2), &w, 30, 512)?.max_deviation);
    }
    Ok(le(worst, 1e-8))
}

fn claim_inequality() -> Outcome {
    for t in [0.3, 0.5, 0.7] {
        for n in 1..=5 {
            let (lhs, rhs) = (claim_norm(t, n), claim_bound(t, n));
            if lhs < rhs {
                return Ok((false, format!("t = {t}, N = {n}: {lhs} < {rhs}")));
            }
        }
    }
    Ok((true, "t ∈ {0.3, 0.5, 0.7}, N ≤ 5".into()))
}

fn winding_matches_roots() -> Outcome {
    let mut r = rng(15);
    let mut compared = 0;
    for _ in 0..50 {
        let coeffs: Vec<C> = (0..4).map(|_| c(2.0 * r.random::<f64>() - 1.0, 2.0 * r.random::<f64>() - 1.0)).collect();
        let h = FunctionSpec::Poly(coeffs);
        let omega = disk_point(&mut r, 2.0);
        let roots = zero_count(&h, omega)?;
        if !roots.near_boundary.is_empty() {
            continue;
        }
        match winding(&h, omega) {
            Ok(wd) if wd.index as usize != roots.count => {
                return Ok((false, format!("`{h}` at {omega}: winding {} vs {} roots", wd.index, roots.count)))
            }
            Ok(_) => compared += 1,
            // too close to h(𝕋) for the margin
            Err(_) => continue,
        }
    }
    Ok((compared >= 40, format!("{compared} pairs compared")))
}

fn blaschke_sum_rule() -> Outcome {
    let b = FunctionSpec::Blaschke(bp(&[c(0.0, 0.0), c(0.5, 0.0)]));
    let mut r = rng(16);
    for _ in 0..10 {
        let omega = disk_point(&mut r, 0.9);
        let wd = winding(&b, omega)?;
        if wd.index != 2 {
            return Ok((false, format!("index {} at {omega}", wd.index)));
        }
    }
    Ok((true, "index 2 on 10 interior points".into()))
}

fn example_factorization() -> FunctionSpec {
    let g = FunctionSpec::Poly(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
    FunctionSpec::compose(g, FunctionSpec::Blaschke(bp(&[c(0.0, 0.0), c(0.4, 0.0)])))
}

fn monodromy_repeatable() -> Outcome {
    let f = example_factorization();
    let omega0 = crate::monodromy::default_base_point(&f)?;
    let a = monodromy_generators(&f, omega0)?;
    let b = monodromy_generators(&f, omega0)?;
    Ok((a.generators == b.generators && a.fiber.len() == 6, format!("{:?}", a.one_line())))
}

fn decomposition_round_trip() -> Outcome {
    let d = decompose(&example_factorization(), None)?;
    let ok = d.m == 2 && d.residual < 1e-8 && d.test_points == 200;
    Ok((ok, format!("m = {}, residual {:.3e}", d.m, d.residual)))
}

fn order_bookkeeping() -> Outcome {
    let f = example_factorization();
    let d = decompose(&f, None)?;
    let wf = winding(&f, d.base)?.index as usize;
    Ok((wf == d.m * d.h_index, format!("{wf} = {}·{}", d.m, d.h_index)))
}

fn verdict_symmetry() -> Outcome {
    let w = WeightSequence::bergman(1.0)?;
    let f1 = example_factorization();
    let g = FunctionSpec::Poly(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
    let f2 = FunctionSpec::compose(g, FunctionSpec::Blaschke(bp(&[c(0.2, 0.0), c(-0.5, 0.0)])));
    let a = similar(&f1, &f2, &w)?.verdict;
    let b = similar(&f2, &f1, &w)?.verdict;
    Ok((a == b && a.is_similar(), format!("{a:?}")))
}

fn kaplansky_consistent() -> Outcome {
    let w = WeightSequence::bergman(1.0)?;
    let f1 = example_factorization();
    let f2 = FunctionSpec::Poly(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
    let k = kaplansky(&f1, &f2, &w)?;
    Ok((k.consistent, format!("double {:?}, single {:?}", k.double_verdict, k.single_verdict)))
}

fn jordan_base_independent() -> Outcome {
    let w = WeightSequence::bergman(1.0)?;
    let f = example_factorization();
    let a = jordan(&f, &w)?;
    let b = crate::classify::jordan_with(&f, &w, 256, None, Some(c(0.05, 0.31)))?;
    let matched = crate::classify::moebius_match(&a.h, &b.h)?.is_some();
    Ok((a.m == b.m && matched, format!("m = {} / {}", a.m, b.m)))
}

fn json_round_trip() -> Outcome {
    let d = decompose(&example_factorization(), None)?;
    let s = crate::io::to_json(&d)?;
    let back: crate::monodromy::Decomposition = serde_json::from_str(&s).map_err(|e| crate::LabError::Io(e.to_string()))?;
    Ok((crate::io::to_json(&back)? == s, format!("{} bytes", s.len())))
}

type CheckFn = fn() -> Outcome;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("weights", "beta is multiplicative", beta_multiplicative),
    ("weights", "bergman(1) growth sup", bergman_sup),
    ("weights", "dual is an involution", dual_involution),
    ("weights", "polygrowth weight bounds", polygrowth_bounds),
    ("series", "multiply commutative, associative, pointwise", multiply_laws),
    ("series", "Cauchy-Schwarz", cauchy_schwarz),
    ("blaschke", "modulus one on the circle", blaschke_modulus),
    ("blaschke", "fiber count equals order", blaschke_fiber_count),
    ("blaschke", "composition is pointwise", blaschke_composition),
    ("blaschke", "star conjugates zeros", blaschke_star),
    ("operators", "S·M_z = I", shift_inverts_z),
    ("operators", "calculus is multiplicative", calculus_multiplicative),
    ("operators", "multiplication support", mult_support),
    ("operators", "Möbius left inverse", moebius_left_inverse),
    ("operators", "commutant transport", commutant_transport),
    ("frames", "Hardy Gram is kernel block diagonal", hardy_orthogonality),
    ("frames", "identity frame has c1 = c2 = 1", identity_frame_bounds),
    ("frames", "Möbius frame pairing", moebius_pairing),
    ("frames", "claim inequality", claim_inequality),
    ("geometry", "winding agrees with root count", winding_matches_roots),
    ("geometry", "Blaschke sum rule", blaschke_sum_rule),
    ("monodromy", "generators are repeatable", monodromy_repeatable),
    ("monodromy", "decomposition round trip", decomposition_round_trip),
    ("monodromy", "order bookkeeping", order_bookkeeping),
    ("classify", "verdict symmetry", verdict_symmetry),
    ("classify", "Kaplansky consistency", kaplansky_consistent),
    ("classify", "jordan independent of base point", jordan_base_independent),
    ("io", "JSON round trip", json_round_trip),
];

/// Run every check; `progress` sees each result as it completes.
pub fn run_all(mut progress: impl FnMut(&Check)) -> VerifyReport {
    let mut checks = Vec::with_capacity(CHECKS.len());
    for (module, name, f) in CHECKS {
        let start = Instant::now();
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let check = Check {
            module: module.to_string(),
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&check);
        checks.push(check);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        failed: checks.len() - passed,
        passed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = run_all(|_| {});
        let failures: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        assert!(failures.is_empty(), "{failures:#?}");
    }
}
