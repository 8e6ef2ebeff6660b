//! Fiber continuation, monodromy permutations, block systems, and the
//! reconstruction of a maximal Blaschke inner factor `f = h∘B`.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Holomorphic, PushForward};
use crate::blaschke::BlaschkeProduct;
use crate::error::{fmt_c, LabError, Result};
use crate::geometry::{self, boundary_curve, curve_distance};
use crate::series::{sample_circle_inverse, FunctionSpec, PowerSeries};

type C = Complex64;

/// Minimum distance of a base point from branch values and from `f(𝕋)`.
pub const BASE_CLEARANCE: f64 = 1e-3;
/// Fiber points closer than this are treated as colliding.
pub const COLLISION: f64 = 1e-6;
/// Pointwise tolerance of the outer-factor consistency check.
pub const CONSISTENCY_TOL: f64 = 1e-8;
pub const HELD_OUT_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub base: C,
    pub points: Vec<C>,
}

impl Fiber {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn min_separation(&self) -> f64 {
        min_separation(&self.points)
    }
}

fn min_separation(points: &[C]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

fn cmp_c(a: &C, b: &C) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Distinct preimages of `ω0` in 𝔻, ordered by `(re, im)`.
pub fn base_fiber(h: &impl Holomorphic, omega0: C) -> Result<Fiber> {
    let branch = geometry::branch_values(h)?;
    if let Some(b) = branch.iter().find(|b| (*b - omega0).norm() <= BASE_CLEARANCE) {
        return Err(LabError::Domain(format!(
            "base point {} is within {BASE_CLEARANCE} of the branch value {}",
            fmt_c(omega0),
            fmt_c(*b)
        )));
    }
    let curve = boundary_curve(h, 4096)?;
    if curve_distance(&curve, omega0) <= BASE_CLEARANCE {
        return Err(LabError::Domain(format!("base point {} is within {BASE_CLEARANCE} of h(𝕋)", fmt_c(omega0))));
    }
    let sol = h.fiber(omega0)?;
    let mut points = sol.distinct();
    points.sort_by(cmp_c);
    let index = geometry::winding_index(h, omega0)? as usize;
    if points.len() != index || sol.count() != index {
        return Err(LabError::InconsistentFiber(format!(
            "{} distinct preimages of {} but index {index}",
            points.len(),
            fmt_c(omega0)
        )));
    }
    let fiber = Fiber { base: omega0, points };
    if fiber.len() > 1 && fiber.min_separation() <= COLLISION {
        return Err(LabError::InconsistentFiber(format!(
            "fiber over {} has points closer than {COLLISION}",
            fmt_c(omega0)
        )));
    }
    Ok(fiber)
}

fn newton(h: &impl Holomorphic, mut z: C, omega: C) -> Option<(C, f64)> {
    let mut first = None;
    for _ in 0..8 {
        let (v, d) = h.eval_with_derivative(z);
        if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
            return None;
        }
        let step = (v - omega) / d;
        first.get_or_insert(step.norm());
        z -= step;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            return Some((z, first.unwrap()));
        }
    }
    let (v, _) = h.eval_with_derivative(z);
    ((v - omega).norm() <= 1e-12 * (1.0 + omega.norm())).then_some((z, first.unwrap_or(0.0)))
}

/// Continue every fiber point along the polyline `path` (which starts at the
/// fiber's base point). Point `i` of the result continues point `i` of `fiber`.
pub fn track_fiber(h: &impl Holomorphic, fiber: &Fiber, path: &[C]) -> Result<Fiber> {
    if path.is_empty() || (path[0] - fiber.base).norm() > 1e-12 * (1.0 + fiber.base.norm()) {
        return Err(LabError::Tracking("path does not start at the fiber's base point".into()));
    }
    let mut pts = fiber.points.clone();
    let mut running = if pts.len() > 1 { fiber.min_separation() } else { f64::INFINITY };
    for seg in path.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mut s = 0.0f64;
        let mut ds = 0.125f64;
        while s < 1.0 {
            let step = ds.min(1.0 - s);
            let w0 = a + (b - a) * s;
            let w1 = a + (b - a) * (s + step);
            let mut next = Vec::with_capacity(pts.len());
            let mut ok = true;
            for &z in &pts {
                let (_, d) = h.eval_with_derivative(z);
                let pred = z + (w1 - w0) / d;
                match newton(h, pred, w1) {
                    Some((zn, corr)) if corr < 0.1 * running.min(1.0) && (zn - z).norm() < 0.25 * running.min(1.0) => next.push(zn),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            let sep = if ok && next.len() > 1 { min_separation(&next) } else { f64::INFINITY };
            if ok && sep >= 0.5 * running {
                pts = next;
                running = running.min(sep);
                s += step;
                ds = (step * 1.5).min(0.25);
            } else {
                ds = step * 0.5;
                if ds < 1e-12 {
                    return Err(LabError::Tracking(format!(
                        "step size underflow near ω = {}",
                        fmt_c(a + (b - a) * s)
                    )));
                }
            }
            if running <= COLLISION {
                return Err(LabError::Tracking(format!(
                    "fiber points collide near ω = {}",
                    fmt_c(a + (b - a) * s)
                )));
            }
        }
    }
    Ok(Fiber {
        base: *path.last().unwrap(),
        points: pts,
    })
}

/// `perm[i] = j` when point `i` of `base` continues to point `j`.
fn match_permutation(base: &Fiber, end: &Fiber) -> Option<Vec<usize>> {
    let tol = 1e-6f64.min(0.25 * base.min_separation());
    let mut perm = Vec::with_capacity(base.len());
    let mut used = vec![false; base.len()];
    for p in &end.points {
        let (j, d) = base
            .points
            .iter()
            .enumerate()
            .map(|(j, q)| (j, (p - q).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        if d > tol || used[j] {
            return None;
        }
        used[j] = true;
        perm.push(j);
    }
    Some(perm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyAction {
    pub fiber: Fiber,
    /// One per used branch value, 0-based images.
    pub generators: Vec<Vec<usize>>,
    pub branch_values: Vec<C>,
    /// Branch values whose loops did not return the fiber to itself.
    pub skipped: Vec<C>,
    pub closure_size: usize,
    pub closure_capped: bool,
    pub transitive: bool,
}

impl MonodromyAction {
    /// Generators in one-line notation, 1-based.
    pub fn one_line(&self) -> Vec<String> {
        self.generators
            .iter()
            .map(|g| g.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" "))
            .collect()
    }
}

fn loop_paths(omega0: C, b: C, others: &[C]) -> Vec<Vec<C>> {
    let d_other = others
        .iter()
        .filter(|o| (*o - b).norm() > 0.0)
        .map(|o| (o - b).norm())
        .fold(f64::INFINITY, f64::min);
    let rho = 1e-2f64.max(d_other / 4.0).min(d_other / 2.0).min((omega0 - b).norm() / 2.0);
    let dir = (omega0 - b) / (omega0 - b).norm();
    let entry = b + dir * rho;
    let circle: Vec<C> = (0..=64).map(|k| b + dir * rho * C::from_polar(1.0, TAU * k as f64 / 64.0)).collect();
    // a branch value next to ω0 only has to be passed at half its distance
    let clear = |p: &[C]| {
        p.windows(2).all(|s| {
            others
                .iter()
                .filter(|o| (*o - b).norm() > 0.0)
                .all(|&o| seg_dist(o, s[0], s[1]) > BASE_CLEARANCE.max(0.25 * rho).min(0.5 * (o - omega0).norm()))
        })
    };
    let mut out = Vec::new();
    let chord = entry - omega0;
    let mut vias: Vec<Option<C>> = vec![None];
    for s in [0.15, -0.15, 0.3, -0.3, 0.45, -0.45] {
        vias.push(Some(omega0 + chord * 0.5 + chord * C::new(0.0, s)));
    }
    for via in vias {
        let mut approach = vec![omega0];
        approach.extend(via);
        approach.push(entry);
        if !clear(&approach) {
            continue;
        }
        let mut p = approach.clone();
        p.extend_from_slice(&circle[1..]);
        p.extend(approach.iter().rev().skip(1));
        out.push(p);
    }
    out
}

fn seg_dist(p: C, a: C, b: C) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

fn compose_perm(a: &[usize], b: &[usize]) -> Vec<usize> {
    // first a, then b
    a.iter().map(|&i| b[i]).collect()
}

fn group_closure(gens: &[Vec<usize>], n: usize, cap: usize) -> (usize, bool) {
    let id: Vec<usize> = (0..n).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([id.clone()]);
    let mut queue = VecDeque::from([id]);
    while let Some(p) = queue.pop_front() {
        for g in gens {
            let q = compose_perm(&p, g);
            if seen.insert(q.clone()) {
                if seen.len() >= cap {
                    return (seen.len(), true);
                }
                queue.push_back(q);
            }
        }
    }
    (seen.len(), false)
}

fn orbit(gens: &[Vec<usize>], start: usize, n: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for g in gens {
            if g.len() == n && seen.insert(g[i]) {
                stack.push(g[i]);
            }
        }
    }
    seen
}

/// Loops around every branch value from `ω0` and the permutations they induce.
pub fn monodromy_generators(h: &impl Holomorphic, omega0: C) -> Result<MonodromyAction> {
    let fiber = base_fiber(h, omega0)?;
    let branch = geometry::branch_values(h)?;
    let n = fiber.len();
    let results: Vec<Option<Vec<usize>>> = branch
        .par_iter()
        .map(|&b| {
            for path in loop_paths(omega0, b, &branch) {
                if let Ok(end) = track_fiber(h, &fiber, &path) {
                    if let Some(p) = match_permutation(&fiber, &end) {
                        return Some(p);
                    }
                }
            }
            None
        })
        .collect();
    let mut generators = Vec::new();
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    for (b, r) in branch.iter().zip(results) {
        match r {
            Some(p) => {
                used.push(*b);
                generators.push(p);
            }
            None => skipped.push(*b),
        }
    }
    let (closure_size, closure_capped) = group_closure(&generators, n, 40320);
    let transitive = n == 0 || orbit(&generators, 0, n).len() == n;
    Ok(MonodromyAction {
        fiber,
        generators,
        branch_values: used,
        skipped,
        closure_size,
        closure_capped,
        transitive,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSystem {
    /// Blocks sorted internally and by first element.
    pub blocks: Vec<Vec<usize>>,
    pub d: usize,
    pub trivial: bool,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

/// Finest generator-stable partition in which each given pair is merged.
fn stable_closure(gens: &[Vec<usize>], n: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for &(a, b) in pairs {
        if uf.union(a, b) {
            queue.push_back((a, b));
        }
    }
    while let Some((a, b)) = queue.pop_front() {
        for g in gens {
            let (ga, gb) = (g[a], g[b]);
            if uf.union(ga, gb) {
                queue.push_back((ga, gb));
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_of[r] == usize::MAX {
            root_of[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_of[r]].push(i);
    }
    blocks
}

fn as_system(blocks: Vec<Vec<usize>>, n: usize) -> Option<BlockSystem> {
    let d = blocks[0].len();
    if blocks.iter().any(|b| b.len() != d) {
        return None;
    }
    Some(BlockSystem {
        trivial: d == 1 || d == n,
        d,
        blocks,
    })
}

/// Minimal block systems: for each `i ≠ 0`, the finest stable partition
/// merging `{0, i}`. Deduplicated and sorted by block size.
pub fn block_systems(action: &MonodromyAction) -> Vec<BlockSystem> {
    let n = action.fiber.len();
    let mut out: Vec<BlockSystem> = Vec::new();
    for i in 1..n {
        let blocks = stable_closure(&action.generators, n, &[(0, i)]);
        if blocks.len() == 1 {
            continue;
        }
        if let Some(s) = as_system(blocks, n) {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out.sort_by(|a, b| a.d.cmp(&b.d).then(a.blocks.cmp(&b.blocks)));
    out
}

/// Every block system with `d ≥ 2`, including the one-block system, from
/// joins of the pair closures. Sorted by block size, largest first.
pub fn all_block_systems(action: &MonodromyAction) -> Vec<BlockSystem> {
    let n = action.fiber.len();
    if n < 2 {
        return Vec::new();
    }
    let gens = &action.generators;
    let block_of_zero = |blocks: &[Vec<usize>]| -> Vec<usize> { blocks.iter().find(|b| b.contains(&0)).unwrap().clone() };
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = Vec::new();
    for i in 1..n {
        let blk = block_of_zero(&stable_closure(gens, n, &[(0, i)]));
        if !found.contains(&blk) {
            found.push(blk.clone());
            frontier.push(blk);
        }
    }
    while let Some(a) = frontier.pop() {
        let mut fresh = Vec::new();
        for b in &found {
            let pairs: Vec<(usize, usize)> = a.iter().chain(b).map(|&x| (0, x)).collect();
            let joined = block_of_zero(&stable_closure(gens, n, &pairs));
            if !found.contains(&joined) && !fresh.contains(&joined) {
                fresh.push(joined);
            }
        }
        for j in fresh {
            found.push(j.clone());
            frontier.push(j);
        }
    }
    let all: Vec<usize> = (0..n).collect();
    if !found.contains(&all) {
        found.push(all);
    }
    let mut out: Vec<BlockSystem> = found
        .into_iter()
        .filter_map(|blk| {
            let pairs: Vec<(usize, usize)> = blk.iter().map(|&x| (0, x)).collect();
            let blocks = stable_closure(gens, n, &pairs);
            as_system(blocks, n).filter(|s| s.d == blk.len())
        })
        .collect();
    out.sort_by(|a, b| b.d.cmp(&a.d).then(a.blocks.cmp(&b.blocks)));
    out.dedup();
    out
}

/// `∏_{μ ∈ block} (μ − z)/(1 − μ̄z)`.
pub fn inner_factor_from_block(fiber: &Fiber, block: &[usize]) -> Result<BlaschkeProduct> {
    BlaschkeProduct::new(block.iter().map(|&i| fiber.points[i]).collect(), 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFactor {
    pub radius: f64,
    /// `h(r e^{2πis/S})`
    pub samples: Vec<C>,
    pub taylor: PowerSeries,
    /// `|ĥ(k)| r^k` at the last retained index, relative to the largest.
    pub tail: f64,
    /// Largest disagreement of `f` across a fiber of `B̂` on the circle.
    pub max_spread: f64,
}

/// Sample `h(w) = f(z)`, `B̂(z) = w`, on `|w| = r` and check that every
/// preimage gives the same value.
pub fn outer_factor(f: &impl Holomorphic, bhat: &BlaschkeProduct, r: f64, samples: usize) -> Result<OuterFactor> {
    if !(r > 0.0 && r < 1.0) || !samples.is_power_of_two() {
        return Err(LabError::Domain(format!("outer_factor needs 0 < r < 1 and a power-of-two sample count, got r = {r}, S = {samples}")));
    }
    let evals: Vec<Result<(C, f64)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let w = C::from_polar(r, TAU * s as f64 / samples as f64);
            let pre = bhat.preimages(w)?;
            let vals: Vec<C> = pre.iter().map(|&z| f.eval(z)).collect();
            let v0 = vals[0];
            let spread = vals.iter().map(|v| (v - v0).norm()).fold(0.0, f64::max);
            Ok((v0, spread))
        })
        .collect();
    let mut values = Vec::with_capacity(samples);
    let mut max_spread = 0.0f64;
    for e in evals {
        let (v, s) = e?;
        values.push(v);
        max_spread = max_spread.max(s);
    }
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if max_spread > CONSISTENCY_TOL * scale {
        return Err(LabError::Inconsistent(format!(
            "f differs by {max_spread:.3e} across a fiber of the candidate inner factor"
        )));
    }
    let (taylor, tail) = circle_taylor(&values, r);
    Ok(OuterFactor {
        radius: r,
        samples: values,
        taylor,
        tail,
        max_spread,
    })
}

/// Taylor coefficients from samples on `|w| = r`, cut where the scaled
/// coefficients reach rounding level.
fn circle_taylor(values: &[C], r: f64) -> (PowerSeries, f64) {
    let s = values.len();
    let scaled = sample_circle_inverse(values);
    let top = scaled.iter().take(s / 2).map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let noise = 1e-14 * top;
    let mut last = 0;
    for (k, c) in scaled.iter().enumerate().take(s / 2) {
        if c.norm() > noise {
            last = k;
        }
    }
    let coeffs: Vec<C> = scaled[..=last].iter().enumerate().map(|(k, c)| c / r.powi(k as i32)).collect();
    let tail = scaled[last].norm() / top;
    (PowerSeries::new(coeffs), tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub b: BlaschkeProduct,
    pub m: usize,
    pub h: PushForward,
    pub outer: Option<OuterFactor>,
    pub residual: f64,
    pub test_points: usize,
    pub base: C,
    pub fiber: Fiber,
    /// `winding_index(h, ω0)`
    pub h_index: usize,
    pub branch_values: Vec<C>,
    pub generators: Vec<String>,
    pub closure_size: usize,
    pub transitive: bool,
    /// Block sizes tried, largest first, with the reason each was rejected.
    pub rejected: Vec<(usize, String)>,
    pub certificate: String,
}

impl Decomposition {
    pub fn indecomposable(&self) -> bool {
        self.m == 1
    }
}

/// `f(0)` pushed away from branch values and from `f(𝕋)` until both are at
/// least `10·BASE_CLEARANCE` away.
pub fn default_base_point(f: &impl Holomorphic) -> Result<C> {
    let branch = geometry::branch_values(f)?;
    let curve = boundary_curve(f, 4096)?;
    let want = 10.0 * BASE_CLEARANCE;
    let clearance = |w: C| {
        let db = branch.iter().map(|b| (b - w).norm()).fold(f64::INFINITY, f64::min);
        db.min(curve_distance(&curve, w))
    };
    let mut w = f.eval(C::new(0.0, 0.0));
    let mut step = want;
    for _ in 0..60 {
        if clearance(w) >= want {
            return Ok(w);
        }
        // move away from the nearest branch value, or sideways if none is close
        let nearest = branch.iter().copied().min_by(|a, b| (a - w).norm().total_cmp(&(b - w).norm()));
        let dir = match nearest {
            Some(b) if (w - b).norm() < want => {
                let v = w - b;
                if v.norm() > 0.0 {
                    v / v.norm()
                } else {
                    C::new(1.0, 0.0)
                }
            }
            _ => C::new(0.0, 1.0),
        };
        w += dir * step;
        step *= 1.5;
    }
    Err(LabError::Domain("no admissible base point found near f(0)".into()))
}

fn held_out_points(n: usize, seed: u64) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = 0.95 * rng.random::<f64>().sqrt();
            C::from_polar(r, TAU * rng.random::<f64>())
        })
        .collect()
}

/// `max |f(z) − h(B̂(z))|` over fresh points, with `h` evaluated through the
/// other preimages of `B̂(z)`.
fn push_forward_residual(h: &PushForward, points: &[C]) -> Result<f64> {
    let spreads: Vec<Result<f64>> = points.par_iter().map(|&z| h.fiber_spread(z)).collect();
    spreads.into_iter().try_fold(0.0f64, |acc, s| Ok(acc.max(s?)))
}

fn certificate_id(d: &Decomposition) -> String {
    // FNV-1a over the fields that determine the factorization
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    for z in d.b.zeros() {
        feed(&z.re.to_le_bytes());
        feed(&z.im.to_le_bytes());
    }
    feed(&d.b.theta().to_le_bytes());
    feed(&(d.m as u64).to_le_bytes());
    feed(d.h.outer.to_string().as_bytes());
    feed(&d.residual.to_le_bytes());
    format!("{hash:016x}")
}

/// Maximal factorization `f = h∘B` with `B` a Blaschke product.
///
/// Every block system of the monodromy action is tried, largest block first;
/// the first one whose inner factor passes the circle consistency check and
/// the held-out residual test gives `B`. When none passes, `f` is reported
/// indecomposable with `m = 1`.
pub fn decompose(f: &FunctionSpec, omega0: Option<C>) -> Result<Decomposition> {
    let omega0 = match omega0 {
        Some(w) => w,
        None => default_base_point(f)?,
    };
    let action = monodromy_generators(f, omega0)?;
    let test = held_out_points(HELD_OUT_POINTS, 0x5eed_0001);
    let mut rejected = Vec::new();
    let mut accepted: Option<(BlaschkeProduct, OuterFactor, f64)> = None;
    for sys in all_block_systems(&action) {
        let block = sys.blocks.iter().find(|b| b.contains(&0)).unwrap();
        let bhat = inner_factor_from_block(&action.fiber, block)?;
        let outer = match outer_factor(f, &bhat, 0.7, 1024) {
            Ok(o) => o,
            Err(e) => {
                rejected.push((sys.d, e.to_string()));
                continue;
            }
        };
        let pf = PushForward::new(f.clone(), bhat.clone());
        let residual = push_forward_residual(&pf, &test)?;
        let scale = outer.samples.iter().map(|v| v.norm()).fold(1.0, f64::max);
        if residual >= CONSISTENCY_TOL * scale {
            rejected.push((sys.d, format!("held-out residual {residual:.3e}")));
            continue;
        }
        accepted = Some((bhat, outer, residual));
        break;
    }
    let n = action.fiber.len();
    let (b, outer, residual) = match accepted {
        Some((b, o, r)) => (b, Some(o), r),
        None => (BlaschkeProduct::identity(), None, 0.0),
    };
    let m = b.order();
    let h = PushForward::new(f.clone(), b.clone());
    let h_index = if m == 1 { n } else { h.fiber(omega0)?.count() };
    if h_index * m != n {
        return Err(LabError::Inconsistent(format!("index {n} is not {m}·{h_index}")));
    }
    let mut d = Decomposition {
        b,
        m,
        h,
        outer,
        residual,
        test_points: HELD_OUT_POINTS,
        base: omega0,
        fiber: action.fiber.clone(),
        h_index,
        branch_values: action.branch_values.clone(),
        generators: action.one_line(),
        closure_size: action.closure_size,
        transitive: action.transitive,
        rejected,
        certificate: String::new(),
    };
    d.certificate = certificate_id(&d);
    Ok(d)
}
