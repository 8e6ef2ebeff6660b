//! Dense complex polynomials (constant term first) and their roots.
//!
//! Roots come from the eigenvalues of the companion matrix, are polished by
//! Newton's method and finally grouped into clusters so that multiple roots
//! are reported with their multiplicity.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Coefficient vector `c[k]` of `z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<C>);

/// A root together with the number of times it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCluster {
    pub root: C,
    pub multiplicity: usize,
}

impl Poly {
    pub fn constant(c: C) -> Self {
        Poly(vec![c])
    }

    pub fn one() -> Self {
        Poly(vec![ONE])
    }

    pub fn zero() -> Self {
        Poly(vec![ZERO])
    }

    /// `a - z`
    pub fn linear_factor(a: C) -> Self {
        Poly(vec![a, -ONE])
    }

    pub fn coeffs(&self) -> &[C] {
        &self.0
    }

    /// Degree after dropping coefficients below `1e-14` relative to the largest one.
    pub fn degree(&self) -> usize {
        self.trimmed().0.len().saturating_sub(1)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn trimmed(&self) -> Poly {
        let scale = self.max_abs();
        let mut v = self.0.clone();
        while v.len() > 1 && v.last().map_or(false, |c| c.norm() <= 1e-14 * scale) {
            v.pop();
        }
        if v.is_empty() {
            v.push(ZERO);
        }
        Poly(v)
    }

    pub fn eval(&self, z: C) -> C {
        self.0.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: C) -> (C, C) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.0.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Sum of `|c_k| |z|^k`, the natural scale for residuals at `z`.
    pub fn abs_eval(&self, z: C) -> f64 {
        let r = z.norm();
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|k| {
                    self.0.get(k).copied().unwrap_or(ZERO) + other.0.get(k).copied().unwrap_or(ZERO)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, s: C) -> Poly {
        Poly(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![ZERO; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn pow(&self, n: usize) -> Poly {
        (0..n).fold(Poly::one(), |acc, _| acc.mul(self))
    }

    /// Coefficientwise complex conjugate, i.e. the polynomial `p*(z) = conj(p(conj z))`.
    pub fn star(&self) -> Poly {
        Poly(self.0.iter().map(|c| c.conj()).collect())
    }

    /// All complex roots with multiplicity, via companion-matrix eigenvalues
    /// followed by Newton polishing.
    pub fn roots(&self) -> Result<Vec<C>> {
        let p = self.trimmed();
        // exact zero roots are split off first; a nilpotent companion block
        // stalls the QR iteration
        let zeros_at_origin = p.0.iter().take_while(|c| **c == ZERO).count().min(p.0.len() - 1);
        let p = Poly(p.0[zeros_at_origin..].to_vec());
        let mut roots = vec![ZERO; zeros_at_origin];
        let deg = p.0.len() - 1;
        if deg == 1 {
            roots.push(-p.0[0] / p.0[1]);
        } else if deg > 1 {
            let lead = p.0[deg];
            let mut comp = DMatrix::<C>::zeros(deg, deg);
            for i in 1..deg {
                comp[(i, i - 1)] = ONE;
            }
            for i in 0..deg {
                comp[(i, deg - 1)] = -p.0[i] / lead;
            }
            let eig: Vec<C> = match comp.try_schur(f64::EPSILON, 200 * deg) {
                Some(schur) => schur.eigenvalues().map(|e| e.iter().copied().collect()).unwrap_or_default(),
                None => Vec::new(),
            };
            let eig = if eig.len() == deg { eig } else { aberth(&p)? };
            let dp = p.derivative();
            roots.extend(eig.iter().map(|&z| polish(&p, &dp, z)));
        }
        if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::RootFinder("non-finite eigenvalue".into()));
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    /// Roots grouped by proximity: points closer than `tol` are one cluster.
    /// Tightly grouped roots whose centroid annihilates the derivatives up to
    /// the group size are also merged, since companion eigenvalues of an
    /// `m`-fold root scatter at scale `eps^(1/m)`.
    pub fn root_clusters(&self, tol: f64) -> Result<Vec<RootCluster>> {
        let roots = self.roots()?;
        Ok(cluster_roots(&self.trimmed(), &roots, tol))
    }
}

/// Simultaneous Aberth–Ehrlich iteration, used when the Schur form fails.
fn aberth(p: &Poly) -> Result<Vec<C>> {
    let deg = p.0.len() - 1;
    let dp = p.derivative();
    let lead = p.0[deg].norm();
    // Cauchy bound on the root moduli
    let radius = 1.0 + p.0[..deg].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let mut z: Vec<C> = (0..deg)
        .map(|k| C::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (v, d) = (p.eval(z[i]), dp.eval(z[i]));
            if v == ZERO {
                continue;
            }
            let ratio = v / d;
            let repulsion: C = (0..deg).filter(|&j| j != i).map(|j| ONE / (z[i] - z[j])).sum();
            let step = ratio / (ONE - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-15 {
            return Ok(z);
        }
    }
    if z.iter().all(|r| p.eval(*r).norm() <= 1e-8 * p.abs_eval(*r)) {
        Ok(z)
    } else {
        Err(LabError::RootFinder(format!("degree {deg} polynomial: Schur and Aberth iterations failed")))
    }
}

fn polish(p: &Poly, dp: &Poly, mut z: C) -> C {
    let mut best = z;
    let mut best_res = p.eval(z).norm();
    for _ in 0..50 {
        let v = p.eval(z);
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        z -= step;
        let res = p.eval(z).norm();
        if res < best_res {
            best_res = res;
            best = z;
        }
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    best
}

pub(crate) fn cluster_roots(p: &Poly, roots: &[C], tol: f64) -> Vec<RootCluster> {
    // single-linkage clustering at `tol`
    let n = roots.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        let mut i = i;
        while g[i] != r {
            let next = g[i];
            g[i] = r;
            i = next;
        }
        r
    }
    let link = |g: &mut Vec<usize>, radius: f64| {
        for i in 0..n {
            for j in i + 1..n {
                if (roots[i] - roots[j]).norm() <= radius {
                    let (a, b) = (find(g, i), find(g, j));
                    if a != b {
                        g[b] = a;
                    }
                }
            }
        }
    };
    link(&mut group, tol);

    let collect = |g: &mut Vec<usize>| {
        let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
        for i in 0..n {
            let r = find(g, i);
            match clusters.iter_mut().find(|(root, _)| *root == r) {
                Some((_, members)) => members.push(i),
                None => clusters.push((r, vec![i])),
            }
        }
        clusters
    };

    // Second pass: loose groups whose centroid is a genuine multiple root.
    let loose = collect(&mut group.clone());
    let mut wide = group.clone();
    link(&mut wide, 1e-4);
    for (_, members) in collect(&mut wide) {
        let distinct: std::collections::BTreeSet<usize> =
            members.iter().map(|&i| loose.iter().position(|(_, m)| m.contains(&i)).unwrap()).collect();
        if distinct.len() < 2 {
            continue;
        }
        let centroid = members.iter().map(|&i| roots[i]).sum::<C>() / members.len() as f64;
        let mut d = p.clone();
        let mut ok = true;
        for _ in 0..members.len() {
            let scale = d.abs_eval(centroid).max(f64::MIN_POSITIVE);
            if d.eval(centroid).norm() > 1e-6 * scale {
                ok = false;
                break;
            }
            d = d.derivative();
        }
        if ok {
            for &i in &members[1..] {
                let (a, b) = (find(&mut group, members[0]), find(&mut group, i));
                if a != b {
                    group[b] = a;
                }
            }
        }
    }

    let mut out: Vec<RootCluster> = collect(&mut group)
        .into_iter()
        .map(|(_, members)| {
            let m = members.len();
            let centroid = members.iter().map(|&i| roots[i]).sum::<C>() / m as f64;
            // an m-fold root of p is a simple root of p^(m-1)
            let root = if m > 1 {
                let mut d = p.clone();
                for _ in 1..m {
                    d = d.derivative();
                }
                polish(&d, &d.derivative(), centroid)
            } else {
                centroid
            };
            RootCluster { root, multiplicity: m }
        })
        .collect();
    out.sort_by(|a, b| a.root.re.total_cmp(&b.root.re).then(a.root.im.total_cmp(&b.root.im)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn quadratic_roots() {
        // z^2 + z + 2 - 2 = z (z + 1)
        let p = Poly(vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let r = p.roots().unwrap();
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(r[1].norm() < 1e-14);
    }

    #[test]
    fn complex_pair() {
        // (z + 0.5)^2 + 0.09 = z^2 + z + 0.34
        let p = Poly(vec![c(0.34, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let r = p.roots().unwrap();
        assert!((r[0] - c(-0.5, -0.3)).norm() < 1e-13);
        assert!((r[1] - c(-0.5, 0.3)).norm() < 1e-13);
    }

    #[test]
    fn triple_root_clusters() {
        // (z - 0.2)^3 (z + 0.5)
        let p = Poly::linear_factor(c(0.2, 0.0))
            .pow(3)
            .mul(&Poly::linear_factor(c(-0.5, 0.0)));
        let cl = p.root_clusters(1e-8).unwrap();
        assert_eq!(cl.len(), 2);
        let triple = cl.iter().find(|c| c.multiplicity == 3).unwrap();
        assert!((triple.root - c(0.2, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn nilpotent_companion() {
        let p = Poly::linear_factor(ZERO).pow(3);
        assert_eq!(p.roots().unwrap(), vec![ZERO; 3]);
        let q = Poly(vec![ZERO, ZERO, c(-0.3, 0.0), ONE]);
        let r = q.roots().unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[2] - c(0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn aberth_agrees_with_schur() {
        let p = Poly(vec![c(0.3, 0.1), c(-1.0, 0.5), c(0.2, 0.0), c(1.0, -2.0), ONE]);
        let mut a = aberth(&p).unwrap();
        a.sort_by(|x, y| x.re.total_cmp(&y.re));
        let s = p.roots().unwrap();
        for (x, y) in a.iter().zip(&s) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn horner_derivative() {
        let p = Poly(vec![c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let (v, d) = p.eval_with_derivative(c(1.0, 0.0));
        assert_eq!(v, c(4.0, 0.0));
        assert_eq!(d, c(3.0, 0.0));
    }
}
