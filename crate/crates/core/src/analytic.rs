//! A common interface over functions holomorphic on a neighbourhood of the
//! closed disk, including functions known only through a factorization
//! `f = h∘B`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blaschke::{critical_points, solve_fiber, BlaschkeProduct, FiberSolution, CLUSTER_TOL};
use crate::error::{LabError, Result};
use crate::poly::RootCluster;
use crate::series::{FunctionSpec, PowerSeries};

type C = Complex64;

pub trait Holomorphic: Send + Sync {
    fn eval(&self, z: C) -> C;

    fn eval_with_derivative(&self, z: C) -> (C, C);

    /// Solutions of `h(z) = ω` in 𝔻 with multiplicity.
    fn fiber(&self, omega: C) -> Result<FiberSolution>;

    /// A set containing every critical value `h(z*)`, `z* ∈ 𝔻`.
    fn critical_values(&self) -> Result<Vec<C>>;

    fn label(&self) -> String;
}

impl Holomorphic for FunctionSpec {
    fn eval(&self, z: C) -> C {
        FunctionSpec::eval(self, z)
    }

    fn eval_with_derivative(&self, z: C) -> (C, C) {
        FunctionSpec::eval_with_derivative(self, z)
    }

    fn fiber(&self, omega: C) -> Result<FiberSolution> {
        solve_fiber(self, omega)
    }

    fn critical_values(&self) -> Result<Vec<C>> {
        Ok(critical_points(self)?.into_iter().map(|c| c.value).collect())
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

/// A polynomial given by its coefficients; fibers come from the companion matrix.
impl Holomorphic for PowerSeries {
    fn eval(&self, z: C) -> C {
        PowerSeries::eval(self, z)
    }

    fn eval_with_derivative(&self, z: C) -> (C, C) {
        PowerSeries::eval_with_derivative(self, z)
    }

    fn fiber(&self, omega: C) -> Result<FiberSolution> {
        self.as_spec().fiber(omega)
    }

    fn critical_values(&self) -> Result<Vec<C>> {
        self.as_spec().critical_values()
    }

    fn label(&self) -> String {
        format!("series(order {})", self.order())
    }
}

impl PowerSeries {
    fn as_spec(&self) -> FunctionSpec {
        FunctionSpec::Poly(self.coeffs()[..=self.degree()].to_vec())
    }
}

/// `h` defined by `h(B(z)) = f(z)`, valid when `f` is constant on the fibers of `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushForward {
    pub outer: FunctionSpec,
    pub inner: BlaschkeProduct,
}

impl PushForward {
    pub fn new(outer: FunctionSpec, inner: BlaschkeProduct) -> Self {
        PushForward { outer, inner }
    }

    /// `max_{z' ∈ B⁻¹(B(z))} |f(z') − f(z)|`
    pub fn fiber_spread(&self, z: C) -> Result<f64> {
        let fz = self.outer.eval(z);
        let pre = self.inner.preimages(self.inner.eval(z))?;
        Ok(pre.iter().map(|&p| (self.outer.eval(p) - fz).norm()).fold(0.0, f64::max))
    }

    fn preimage(&self, w: C) -> C {
        // a preimage away from the critical set keeps h' = f'/B' well conditioned
        self.inner
            .preimages(w)
            .ok()
            .and_then(|pre| {
                pre.into_iter()
                    .max_by(|a, b| self.inner.eval_with_derivative(*a).1.norm().total_cmp(&self.inner.eval_with_derivative(*b).1.norm()))
            })
            .unwrap_or(C::new(f64::NAN, f64::NAN))
    }
}

impl Holomorphic for PushForward {
    fn eval(&self, w: C) -> C {
        self.outer.eval(self.preimage(w))
    }

    fn eval_with_derivative(&self, w: C) -> (C, C) {
        let z = self.preimage(w);
        let (fv, fd) = self.outer.eval_with_derivative(z);
        let (_, bd) = self.inner.eval_with_derivative(z);
        (fv, fd / bd)
    }

    fn fiber(&self, omega: C) -> Result<FiberSolution> {
        let up = solve_fiber(&self.outer, omega)?;
        let d = self.inner.order();
        let mut clusters: Vec<(C, usize)> = Vec::new();
        for c in &up.clusters {
            let w = self.inner.eval(c.root);
            match clusters.iter_mut().find(|(v, _)| (v - w).norm() < 1e3 * CLUSTER_TOL) {
                Some((_, m)) => *m += c.multiplicity,
                None => clusters.push((w, c.multiplicity)),
            }
        }
        let mut out = Vec::with_capacity(clusters.len());
        for (w, m) in clusters {
            if m % d != 0 {
                return Err(LabError::InconsistentFiber(format!(
                    "{m} points over {} do not split into fibers of order {d}",
                    crate::error::fmt_c(w)
                )));
            }
            out.push(RootCluster { root: w, multiplicity: m / d });
        }
        out.sort_by(|a, b| a.root.re.total_cmp(&b.root.re).then(a.root.im.total_cmp(&b.root.im)));
        let mut roots = Vec::new();
        for c in &out {
            roots.extend(std::iter::repeat_n(c.root, c.multiplicity));
        }
        let mut near_boundary: Vec<C> = up.near_boundary.iter().map(|&z| self.inner.eval(z)).collect();
        near_boundary.dedup_by(|a, b| (*a - *b).norm() < 1e3 * CLUSTER_TOL);
        Ok(FiberSolution {
            roots,
            clusters: out,
            near_boundary,
        })
    }

    fn critical_values(&self) -> Result<Vec<C>> {
        self.outer.critical_values()
    }

    fn label(&self) -> String {
        format!("push({} ; {})", self.outer, FunctionSpec::Blaschke(self.inner.clone()))
    }
}

impl<T: Holomorphic + ?Sized> Holomorphic for &T {
    fn eval(&self, z: C) -> C {
        (**self).eval(z)
    }
    fn eval_with_derivative(&self, z: C) -> (C, C) {
        (**self).eval_with_derivative(z)
    }
    fn fiber(&self, omega: C) -> Result<FiberSolution> {
        (**self).fiber(omega)
    }
    fn critical_values(&self) -> Result<Vec<C>> {
        (**self).critical_values()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn g() -> FunctionSpec {
        FunctionSpec::Poly(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)])
    }

    #[test]
    fn push_forward_recovers_outer() {
        let b = BlaschkeProduct::new(vec![c(0.0, 0.0), c(0.4, 0.0)], 0.0).unwrap();
        let f = FunctionSpec::compose(g(), FunctionSpec::Blaschke(b.clone()));
        let h = PushForward::new(f, b);
        for w in [c(0.1, 0.2), c(-0.5, 0.3), c(0.0, -0.8)] {
            let (v, d) = h.eval_with_derivative(w);
            let (gv, gd) = g().eval_with_derivative(w);
            assert!((v - gv).norm() < 1e-12);
            assert!((d - gd).norm() < 1e-9);
        }
        assert!(h.fiber_spread(c(0.3, -0.2)).unwrap() < 1e-13);
    }

    #[test]
    fn push_forward_fiber() {
        let b = BlaschkeProduct::new(vec![c(0.0, 0.0), c(0.4, 0.0)], 0.0).unwrap();
        let f = FunctionSpec::compose(g(), FunctionSpec::Blaschke(b.clone()));
        let h = PushForward::new(f, b);
        let fib = h.fiber(c(0.05, 0.0)).unwrap();
        let direct = g().fiber(c(0.05, 0.0)).unwrap();
        assert_eq!(fib.count(), direct.count());
        for (a, b) in fib.roots.iter().zip(&direct.roots) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn spread_detects_non_factor() {
        let b = BlaschkeProduct::new(vec![c(0.0, 0.0), c(0.4, 0.0)], 0.0).unwrap();
        let h = PushForward::new(g(), b);
        assert!(h.fiber_spread(c(0.3, 0.1)).unwrap() > 1e-3);
    }
}
