//! Finite Blaschke products `e^{iθ} ∏ (z_j − z)/(1 − z̄_j z)`, Möbius maps,
//! fibers and critical points of rational function specs.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{fmt_c, LabError, Result};
use crate::poly::{Poly, RootCluster};
use crate::series::expr::FunctionSpec;
use crate::series::PowerSeries;

type C = Complex64;

/// Zeros must satisfy `|z| < 1 − ZERO_MARGIN`.
pub const ZERO_MARGIN: f64 = 1e-12;
/// Roots with `|z| ≥ 1 − FIBER_MARGIN` are not counted as inside the disk.
pub const FIBER_MARGIN: f64 = 1e-9;
/// Roots closer than this to the unit circle raise a boundary warning.
pub const BOUNDARY_WARN: f64 = 1e-6;
/// Clustering radius for multiplicity detection.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    zeros: Vec<C>,
    theta: f64,
}

fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<C>, theta: f64) -> Result<Self> {
        if zeros.is_empty() {
            return Err(LabError::Domain("a Blaschke product needs at least one zero".into()));
        }
        if let Some(z) = zeros.iter().find(|z| !(z.norm() < 1.0 - ZERO_MARGIN)) {
            return Err(LabError::ZeroOutsideDisk(fmt_c(*z)));
        }
        if !theta.is_finite() {
            return Err(LabError::Domain("phase must be finite".into()));
        }
        Ok(BlaschkeProduct {
            zeros,
            theta: normalize_angle(theta),
        })
    }

    /// `B(z) = z`, written as the single factor `e^{iπ}(0 − z)/1`.
    pub fn identity() -> Self {
        BlaschkeProduct {
            zeros: vec![C::new(0.0, 0.0)],
            theta: PI,
        }
    }

    /// `z^m`
    pub fn power(m: usize) -> Self {
        assert!(m >= 1);
        BlaschkeProduct {
            zeros: vec![C::new(0.0, 0.0); m],
            theta: if m % 2 == 1 { PI } else { 0.0 },
        }
    }

    pub fn zeros(&self) -> &[C] {
        &self.zeros
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn order(&self) -> usize {
        self.zeros.len()
    }

    pub fn phase(&self) -> C {
        // quarter turns are returned exactly so that `z`, `z^m` stay exact
        let quarter = self.theta / (PI / 2.0);
        if quarter == quarter.round() {
            return [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)][quarter as usize % 4];
        }
        C::from_polar(1.0, self.theta)
    }

    pub fn eval(&self, z: C) -> C {
        self.zeros
            .iter()
            .fold(self.phase(), |acc, &a| acc * (a - z) / (1.0 - a.conj() * z))
    }

    /// Value and derivative by the product rule over factors.
    pub fn eval_with_derivative(&self, z: C) -> (C, C) {
        let mut p = self.phase();
        let mut dp = C::new(0.0, 0.0);
        for &a in &self.zeros {
            let den = 1.0 - a.conj() * z;
            let f = (a - z) / den;
            let df = (a.norm_sqr() - 1.0) / (den * den);
            dp = dp * f + p * df;
            p *= f;
        }
        (p, dp)
    }

    /// Taylor coefficients through order `k`, one O(k) factor update per zero.
    pub fn taylor(&self, k: usize) -> PowerSeries {
        self.zeros
            .iter()
            .fold(PowerSeries::one(k).scale(self.phase()), |acc, &a| acc.mul_moebius_factor(a))
    }

    /// `B*(z) = conj(B(conj z))`: conjugated zeros and phase `−θ`.
    pub fn star(&self) -> Self {
        BlaschkeProduct {
            zeros: self.zeros.iter().map(|z| z.conj()).collect(),
            theta: normalize_angle(-self.theta),
        }
    }

    /// Numerator `e^{iθ}∏(z_j − z)` and denominator `∏(1 − z̄_j z)`.
    pub fn rational(&self) -> (Poly, Poly) {
        let mut p = Poly::constant(self.phase());
        let mut q = Poly::one();
        for &a in &self.zeros {
            p = p.mul(&Poly::linear_factor(a));
            q = q.mul(&Poly(vec![C::new(1.0, 0.0), -a.conj()]));
        }
        (p, q)
    }

    /// All `z ∈ 𝔻` with `B(z) = w`, with multiplicity, for `|w| < 1`.
    pub fn preimages(&self, w: C) -> Result<Vec<C>> {
        let (p, q) = self.rational();
        let roots = p.sub(&q.scale(w)).roots()?;
        Ok(roots)
    }

    /// `B1∘B2` with `B1 = self`.
    pub fn compose(&self, inner: &BlaschkeProduct) -> Result<BlaschkeProduct> {
        compose_blaschke(self, inner)
    }
}

pub fn eval_blaschke(b: &BlaschkeProduct, z: C) -> C {
    b.eval(z)
}

/// `B1∘B2`: zeros are the `B2`-fibers over each zero of `B1`, the phase is
/// fixed by matching one probe value.
pub fn compose_blaschke(b1: &BlaschkeProduct, b2: &BlaschkeProduct) -> Result<BlaschkeProduct> {
    let mut zeros = Vec::with_capacity(b1.order() * b2.order());
    for &a in &b1.zeros {
        zeros.extend(b2.preimages(a)?);
    }
    zeros.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let unphased = BlaschkeProduct::new(zeros, 0.0)?;
    let probes = [C::new(0.123, 0.456), C::new(-0.37, 0.21), C::new(0.05, -0.61)];
    let (target, raw) = probes
        .iter()
        .map(|&p| (b1.eval(b2.eval(p)), unphased.eval(p)))
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .expect("probe list is not empty");
    Ok(BlaschkeProduct {
        theta: normalize_angle((target / raw).arg()),
        ..unphased
    })
}

/// An order-one Blaschke product `φ(z) = e^{iθ}(z₀ − z)/(1 − z̄₀ z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoebiusTransform(BlaschkeProduct);

impl MoebiusTransform {
    pub fn new(z0: C, theta: f64) -> Result<Self> {
        Ok(MoebiusTransform(BlaschkeProduct::new(vec![z0], theta)?))
    }

    pub fn from_blaschke(b: BlaschkeProduct) -> Result<Self> {
        if b.order() != 1 {
            return Err(LabError::Domain(format!("Möbius map needs order 1, got {}", b.order())));
        }
        Ok(MoebiusTransform(b))
    }

    /// The involution `φ_a(z) = (a − z)/(1 − ā z)`.
    pub fn involution(a: C) -> Result<Self> {
        Self::new(a, 0.0)
    }

    pub fn z0(&self) -> C {
        self.0.zeros[0]
    }

    pub fn theta(&self) -> f64 {
        self.0.theta
    }

    pub fn as_blaschke(&self) -> &BlaschkeProduct {
        &self.0
    }

    pub fn eval(&self, z: C) -> C {
        self.0.eval(z)
    }

    /// `ψ` with `z₀' = e^{iθ}z₀`, `θ' = −θ`.
    pub fn inverse(&self) -> MoebiusTransform {
        MoebiusTransform(BlaschkeProduct {
            zeros: vec![self.0.phase() * self.z0()],
            theta: normalize_angle(-self.theta()),
        })
    }
}

pub fn moebius_inverse(phi: &MoebiusTransform) -> MoebiusTransform {
    phi.inverse()
}

/// Roots of `P − ωQ` in the open disk for a rational spec `P/Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSolution {
    /// Points in 𝔻 repeated by multiplicity, sorted by `(re, im)`.
    pub roots: Vec<C>,
    pub clusters: Vec<RootCluster>,
    /// Roots (inside or outside) within `BOUNDARY_WARN` of `|z| = 1`.
    pub near_boundary: Vec<C>,
}

impl FiberSolution {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn distinct(&self) -> Vec<C> {
        self.clusters.iter().map(|c| c.root).collect()
    }
}

fn inside(z: C) -> bool {
    z.norm() < 1.0 - FIBER_MARGIN
}

fn near_circle(z: C) -> bool {
    (z.norm() - 1.0).abs() < BOUNDARY_WARN
}

pub fn solve_fiber(spec: &FunctionSpec, omega: C) -> Result<FiberSolution> {
    let r = spec.rational()?;
    let target = r.num.sub(&r.den.scale(omega));
    fiber_of_polynomial(&target)
}

pub(crate) fn fiber_of_polynomial(p: &Poly) -> Result<FiberSolution> {
    let clusters_all = p.root_clusters(CLUSTER_TOL)?;
    let near_boundary = clusters_all.iter().map(|c| c.root).filter(|&z| near_circle(z)).collect();
    let clusters: Vec<RootCluster> = clusters_all.into_iter().filter(|c| inside(c.root)).collect();
    let mut roots = Vec::new();
    for c in &clusters {
        roots.extend(std::iter::repeat_n(c.root, c.multiplicity));
    }
    Ok(FiberSolution {
        roots,
        clusters,
        near_boundary,
    })
}

/// A critical point in 𝔻 together with its critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: C,
    pub multiplicity: usize,
    pub value: C,
}

/// Zeros in 𝔻 of the numerator `P'Q − PQ'` of the derivative.
pub fn critical_points(spec: &FunctionSpec) -> Result<Vec<CriticalPoint>> {
    let r = spec.rational()?;
    let num = r.derivative_numerator();
    if num.degree() == 0 {
        return Ok(Vec::new());
    }
    let clusters = num.root_clusters(CLUSTER_TOL)?;
    Ok(clusters
        .into_iter()
        .filter(|c| inside(c.root))
        .map(|c| CriticalPoint {
            point: c.root,
            multiplicity: c.multiplicity,
            value: spec.eval(c.root),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn b(zeros: &[C], theta: f64) -> BlaschkeProduct {
        BlaschkeProduct::new(zeros.to_vec(), theta).unwrap()
    }

    #[test]
    fn eval_examples() {
        let b2 = b(&[c(0.0, 0.0), c(0.5, 0.0)], 0.0);
        assert_eq!(b2.eval(c(0.0, 0.0)), c(0.0, 0.0));
        let phi = b(&[c(0.5, 0.0)], 0.0);
        assert_eq!(phi.eval(c(0.0, 0.0)), c(0.5, 0.0));
        assert!((phi.eval(c(0.0, 1.0)).norm() - 1.0).abs() < 1e-12);
        assert!((BlaschkeProduct::identity().eval(c(0.3, 0.2)) - c(0.3, 0.2)).norm() < 1e-16);
    }

    #[test]
    fn rejects_boundary_zero() {
        assert!(matches!(BlaschkeProduct::new(vec![c(1.0, 0.0)], 0.0), Err(LabError::ZeroOutsideDisk(_))));
    }

    #[test]
    fn taylor_of_moebius() {
        let t = b(&[c(0.5, 0.0)], 0.0).taylor(2);
        let expect = [c(0.5, 0.0), c(-0.75, 0.0), c(-0.375, 0.0)];
        for (x, y) in t.coeffs().iter().zip(expect) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let bp = b(&[c(0.1, 0.3), c(-0.4, 0.2), c(0.6, -0.1)], 1.1);
        let z = c(0.2, -0.35);
        let h = 1e-6;
        let fd = (bp.eval(z + h) - bp.eval(z - h)) / (2.0 * h);
        assert!((bp.eval_with_derivative(z).1 - fd).norm() < 1e-8);
    }

    #[test]
    fn compose_examples() {
        let b2 = b(&[c(0.2, 0.1), c(-0.3, 0.4)], 0.7);
        let id = BlaschkeProduct::identity().compose(&b2).unwrap();
        for p in [c(0.1, 0.2), c(-0.5, 0.3)] {
            assert!((id.eval(p) - b2.eval(p)).norm() < 1e-12);
        }
        let z6 = BlaschkeProduct::power(2).compose(&BlaschkeProduct::power(3)).unwrap();
        assert_eq!(z6.order(), 6);
        assert!(z6.zeros().iter().all(|z| z.norm() < 1e-12));
        let p = c(0.4, 0.3);
        assert!((z6.eval(p) - p.powi(6)).norm() < 1e-12);

        let r = b(&[c(0.3, 0.0)], 0.0).compose(&BlaschkeProduct::power(2)).unwrap();
        let s = 0.3f64.sqrt();
        assert!((r.zeros()[0] - c(-s, 0.0)).norm() < 1e-12);
        assert!((r.zeros()[1] - c(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn moebius_inverse_examples() {
        let probes: Vec<C> = (0..20).map(|k| C::from_polar(0.9 * (k as f64 + 1.0) / 21.0, 0.7 * k as f64)).collect();
        let check = |phi: &MoebiusTransform| {
            let psi = phi.inverse();
            for &z in &probes {
                assert!((phi.eval(psi.eval(z)) - z).norm() < 1e-12);
                assert!((psi.eval(phi.eval(z)) - z).norm() < 1e-12);
            }
            psi
        };
        let phi = MoebiusTransform::involution(c(0.5, 0.0)).unwrap();
        let psi = check(&phi);
        assert!((psi.z0() - c(0.5, 0.0)).norm() < 1e-16 && psi.theta() == 0.0);

        // rotation e^{iπ/2}z = e^{i3π/2}(0 − z)
        let rot = MoebiusTransform::new(c(0.0, 0.0), 1.5 * PI).unwrap();
        assert!((rot.eval(c(0.3, 0.0)) - c(0.0, 0.3)).norm() < 1e-15);
        let inv = check(&rot);
        assert!((inv.eval(c(0.3, 0.0)) - c(0.0, -0.3)).norm() < 1e-15);

        check(&MoebiusTransform::new(c(0.0, 0.3), 0.0).unwrap());
    }

    #[test]
    fn fiber_examples() {
        let spec: FunctionSpec = "blaschke(0; 0, 0.5)".parse().unwrap();
        let f = solve_fiber(&spec, c(0.0, 0.0)).unwrap();
        assert_eq!(f.count(), 2);
        assert!(f.roots[0].norm() < 1e-14 && (f.roots[1] - c(0.5, 0.0)).norm() < 1e-14);

        let h: FunctionSpec = "poly(2,1,1)".parse().unwrap();
        let f = solve_fiber(&h, c(2.0, 0.0)).unwrap();
        assert_eq!(f.roots.len(), 1);
        assert!(f.roots[0].norm() < 1e-14);
        assert_eq!(f.near_boundary.len(), 1);

        let f = solve_fiber(&h, c(1.66, 0.0)).unwrap();
        assert_eq!(f.count(), 2);
        assert!((f.roots[0] - c(-0.5, -0.3)).norm() < 1e-12);
        assert!((f.roots[1] - c(-0.5, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn critical_point_examples() {
        let h: FunctionSpec = "poly(2,1,1)".parse().unwrap();
        let cp = critical_points(&h).unwrap();
        assert_eq!(cp.len(), 1);
        assert!((cp[0].point - c(-0.5, 0.0)).norm() < 1e-14);
        assert!((cp[0].value - c(1.75, 0.0)).norm() < 1e-14);

        let spec: FunctionSpec = "blaschke(0; 0, 0.5)".parse().unwrap();
        let cp = critical_points(&spec).unwrap();
        assert_eq!(cp.len(), 1);
        assert!((cp[0].point - c(2.0 - 3f64.sqrt(), 0.0)).norm() < 1e-12);

        let phi: FunctionSpec = "blaschke(0.4; 0.3+0.2i)".parse().unwrap();
        assert!(critical_points(&phi).unwrap().is_empty());
    }

    #[test]
    fn star_conjugates_zeros() {
        let bp = b(&[c(0.1, 0.3), c(-0.2, -0.5)], 0.9);
        let s = bp.star();
        assert_eq!(s.order(), 2);
        assert_eq!(s.zeros()[0], c(0.1, -0.3));
        let z = c(0.3, 0.4);
        assert!((s.eval(z) - bp.eval(z.conj()).conj()).norm() < 1e-15);
    }

    fn disk_point() -> impl Strategy<Value = C> {
        (0.0f64..0.9, 0.0f64..TAU).prop_map(|(r, t)| C::from_polar(r, t))
    }

    fn blaschke_strategy() -> impl Strategy<Value = BlaschkeProduct> {
        (prop::collection::vec(disk_point(), 1..5), 0.0f64..TAU).prop_map(|(z, t)| BlaschkeProduct::new(z, t).unwrap())
    }

    proptest! {
        #[test]
        fn unimodular_on_circle(bp in blaschke_strategy()) {
            for k in 0..1024 {
                let z = C::from_polar(1.0, TAU * k as f64 / 1024.0);
                prop_assert!((bp.eval(z).norm() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn composition_is_pointwise(b1 in blaschke_strategy(), b2 in blaschke_strategy(),
                                    pts in prop::collection::vec(disk_point(), 50)) {
            let comp = compose_blaschke(&b1, &b2).unwrap();
            prop_assert_eq!(comp.order(), b1.order() * b2.order());
            for z in pts {
                prop_assert!((comp.eval(z) - b1.eval(b2.eval(z))).norm() < 1e-10);
            }
        }

        #[test]
        fn fiber_has_full_count(bp in blaschke_strategy(), w in (0.0f64..0.95, 0.0f64..TAU)) {
            let w = C::from_polar(w.0, w.1);
            let spec = FunctionSpec::Blaschke(bp.clone());
            let f = solve_fiber(&spec, w).unwrap();
            prop_assert_eq!(f.count(), bp.order());
            for z in f.roots {
                prop_assert!((bp.eval(z) - w).norm() < 1e-8);
            }
        }
    }
}
