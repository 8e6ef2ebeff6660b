//! Boundary curves `h(𝕋)`, winding numbers and index maps over the
//! components of `h(𝔻)∖h(𝕋)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::Holomorphic;
use crate::error::{fmt_c, LabError, Result};

pub mod svg;

type C = Complex64;

/// Relative distance from the curve below which a winding number is refused.
pub const WINDING_MARGIN: f64 = 1e-8;
/// Boundary band in cell diagonals.
pub const BAND_DIAGONALS: f64 = 1.5;

fn on_circle(h: &impl Holomorphic, t: f64) -> C {
    h.eval(C::from_polar(1.0, t))
}

/// `h(e^{2πik/samples})`, refined where neighbours are more than 1% of the
/// bounding-box diameter apart.
pub fn boundary_curve(h: &impl Holomorphic, samples: usize) -> Result<Vec<C>> {
    if samples < 256 {
        return Err(LabError::Domain(format!("boundary_curve needs at least 256 samples, got {samples}")));
    }
    let base: Vec<(f64, C)> = (0..samples)
        .map(|k| {
            let t = TAU * k as f64 / samples as f64;
            (t, on_circle(h, t))
        })
        .collect();
    let diam = bbox_diameter(base.iter().map(|p| p.1));
    let limit = 1e-2 * diam.max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let (t0, v0) = base[k];
        let (t1, v1) = if k + 1 == samples { (TAU, base[0].1) } else { base[k + 1] };
        out.push(v0);
        refine(h, t0, v0, t1, v1, limit, 0, &mut out);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn refine(h: &impl Holomorphic, t0: f64, v0: C, t1: f64, v1: C, limit: f64, depth: u32, out: &mut Vec<C>) {
    if (v1 - v0).norm() <= limit || depth >= 20 {
        return;
    }
    let tm = 0.5 * (t0 + t1);
    let vm = on_circle(h, tm);
    refine(h, t0, v0, tm, vm, limit, depth + 1, out);
    out.push(vm);
    refine(h, tm, vm, t1, v1, limit, depth + 1, out);
}

fn bbox_diameter(points: impl Iterator<Item = C>) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
}

fn segment_distance(p: C, a: C, b: C) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * ab.conj()).re / len2;
    (p - (a + ab * s.clamp(0.0, 1.0))).norm()
}

/// Distance from `ω` to a closed polyline.
pub fn curve_distance(curve: &[C], omega: C) -> f64 {
    let n = curve.len();
    (0..n)
        .map(|k| segment_distance(omega, curve[k], curve[(k + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub raw: f64,
    pub index: u32,
    pub distance: f64,
    /// Zero count in 𝔻 when the fiber solver applies.
    pub root_count: Option<usize>,
}

/// Adaptive argument sum of `h(e^{it}) − ω` over one turn, in turns, with the
/// smallest sampled `|h − ω|` and the closest approach to the chords.
fn argument_sum(h: &impl Holomorphic, omega: C) -> (f64, f64) {
    const START: usize = 256;
    let mut total = 0.0;
    let mut dist = f64::INFINITY;
    let f = |t: f64| on_circle(h, t) - omega;
    for k in 0..START {
        let t0 = TAU * k as f64 / START as f64;
        let t1 = TAU * (k + 1) as f64 / START as f64;
        let mut stack = vec![(t0, f(t0), t1, f(t1), 0u32)];
        while let Some((a, va, b, vb, depth)) = stack.pop() {
            let inc = (vb / va).arg();
            if (inc.abs() > PI / 8.0 || (vb - va).norm() > 0.5 * va.norm().min(vb.norm())) && depth < 48 {
                let m = 0.5 * (a + b);
                let vm = f(m);
                stack.push((m, vm, b, vb, depth + 1));
                stack.push((a, va, m, vm, depth + 1));
            } else {
                total += inc;
                dist = dist.min(segment_distance(C::new(0.0, 0.0), va, vb));
            }
        }
    }
    (total / TAU, dist)
}

/// Winding number of `h(𝕋)` around `ω`, cross-checked against the zero count
/// of `h − ω` in 𝔻 whenever the fiber solver applies.
pub fn winding(h: &impl Holomorphic, omega: C) -> Result<Winding> {
    let (raw, distance) = argument_sum(h, omega);
    let scale = 1.0 + omega.norm().max(h.eval(C::new(0.0, 0.0)).norm());
    let margin = WINDING_MARGIN * scale;
    if distance < margin {
        return Err(LabError::MarginViolation {
            point: fmt_c(omega),
            distance,
            margin,
        });
    }
    let rounded = raw.round();
    if (raw - rounded).abs() > 0.05 || rounded < 0.0 {
        return Err(LabError::AmbiguousWinding { value: raw });
    }
    let index = rounded as u32;
    let root_count = match h.fiber(omega) {
        Ok(f) => Some(f.count()),
        Err(LabError::Domain(_)) | Err(LabError::DegreeCap { .. }) => None,
        Err(e) => return Err(e),
    };
    if let Some(r) = root_count {
        if r != index as usize {
            return Err(LabError::IndexMismatch {
                winding: index as i64,
                roots: r,
            });
        }
    }
    Ok(Winding {
        raw,
        index,
        distance,
        root_count,
    })
}

pub fn winding_index(h: &impl Holomorphic, omega: C) -> Result<u32> {
    winding(h, omega).map(|w| w.index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    /// Roots within `1e-6` of the unit circle; non-empty means `ω` is on or
    /// next to `h(𝕋)` and the count is not an index.
    pub near_boundary: Vec<C>,
}

/// Zeros of `h − ω` in 𝔻 counted with multiplicity.
pub fn zero_count(h: &impl Holomorphic, omega: C) -> Result<ZeroCount> {
    let f = h.fiber(omega)?;
    Ok(ZeroCount {
        count: f.count(),
        near_boundary: f.near_boundary,
    })
}

pub fn branch_values(h: &impl Holomorphic) -> Result<Vec<C>> {
    let mut v: Vec<C> = Vec::new();
    for w in h.critical_values()? {
        if v.iter().all(|u| (u - w).norm() >= 1e-10 * (1.0 + w.norm())) {
            v.push(w);
        }
    }
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(LabError::Domain(format!("empty bounds [{x_min}, {x_max}]×[{y_min}, {y_max}]")));
        }
        Ok(Bounds { x_min, x_max, y_min, y_max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: u32,
    pub cells: usize,
    /// Center of the first cell in row-major order.
    pub sample: C,
}

/// Row-major grid; row 0 is the top row (`y = y_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMap {
    pub bounds: Bounds,
    pub resolution: usize,
    /// `None` marks the boundary band.
    pub cells: Vec<Option<u32>>,
    pub boundary: Vec<C>,
    pub branch_values: Vec<C>,
    pub regions: Vec<Region>,
    pub probed: usize,
}

impl IndexMap {
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.bounds.x_max - self.bounds.x_min) / self.resolution as f64,
            (self.bounds.y_max - self.bounds.y_min) / self.resolution as f64,
        )
    }

    pub fn center(&self, row: usize, col: usize) -> C {
        cell_center(&self.bounds, self.resolution, row, col)
    }

    pub fn at(&self, row: usize, col: usize) -> Option<u32> {
        self.cells[row * self.resolution + col]
    }

    /// Index of the cell containing `p`, if inside the bounds.
    pub fn lookup(&self, p: C) -> Option<Option<u32>> {
        let (dx, dy) = self.cell_size();
        let col = ((p.re - self.bounds.x_min) / dx).floor();
        let row = ((self.bounds.y_max - p.im) / dy).floor();
        if col < 0.0 || row < 0.0 || col >= self.resolution as f64 || row >= self.resolution as f64 {
            return None;
        }
        Some(self.at(row as usize, col as usize))
    }

    /// Distinct nonzero indices, ascending.
    pub fn nonzero_indices(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cells.iter().flatten().copied().filter(|&i| i > 0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn cell_center(b: &Bounds, res: usize, row: usize, col: usize) -> C {
    let dx = (b.x_max - b.x_min) / res as f64;
    let dy = (b.y_max - b.y_min) / res as f64;
    C::new(b.x_min + (col as f64 + 0.5) * dx, b.y_max - (row as f64 + 0.5) * dy)
}

/// Flag every cell whose center lies within `band` of the polyline.
fn boundary_band(curve: &[C], b: &Bounds, res: usize, band: f64) -> Vec<bool> {
    let dx = (b.x_max - b.x_min) / res as f64;
    let dy = (b.y_max - b.y_min) / res as f64;
    let mut flag = vec![false; res * res];
    let n = curve.len();
    for k in 0..n {
        let (p, q) = (curve[k], curve[(k + 1) % n]);
        let c0 = (((p.re.min(q.re) - band - b.x_min) / dx).floor().max(0.0)) as usize;
        let c1 = (((p.re.max(q.re) + band - b.x_min) / dx).ceil().max(0.0) as usize).min(res);
        let r0 = (((b.y_max - p.im.max(q.im) - band) / dy).floor().max(0.0)) as usize;
        let r1 = (((b.y_max - p.im.min(q.im) + band) / dy).ceil().max(0.0) as usize).min(res);
        for row in r0..r1 {
            for col in c0..c1 {
                if !flag[row * res + col] && segment_distance(cell_center(b, res, row, col), p, q) < band {
                    flag[row * res + col] = true;
                }
            }
        }
    }
    flag
}

/// Winding numbers of the polyline around every cell center in one row,
/// from signed crossings of the horizontal line through the row.
fn scanline_row(curve: &[C], y: f64, xs: &[f64]) -> Vec<i64> {
    let n = curve.len();
    let mut crossings: Vec<(f64, i64)> = Vec::new();
    for k in 0..n {
        let (p, q) = (curve[k], curve[(k + 1) % n]);
        let up = p.im <= y && q.im > y;
        let down = p.im > y && q.im <= y;
        if up || down {
            let s = (y - p.im) / (q.im - p.im);
            crossings.push((p.re + s * (q.re - p.re), if up { 1 } else { -1 }));
        }
    }
    crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
    // winding around x counts crossings to the right of x
    let mut right: i64 = crossings.iter().map(|c| c.1).sum();
    let mut j = 0;
    xs.iter()
        .map(|&x| {
            while j < crossings.len() && crossings[j].0 < x {
                right -= crossings[j].1;
                j += 1;
            }
            right
        })
        .collect()
}

/// Per-cell index over `bounds`, with a boundary band of 1.5 cell diagonals,
/// root-count cross-checks on a probe lattice, and a flood-fill check that the
/// index is constant on every 4-connected unflagged region.
pub fn index_map(h: &impl Holomorphic, bounds: Bounds, resolution: usize) -> Result<IndexMap> {
    if resolution == 0 || resolution > 2048 {
        return Err(LabError::Domain(format!("resolution {resolution} outside 1..=2048")));
    }
    let res = resolution;
    let (dx, dy) = ((bounds.x_max - bounds.x_min) / res as f64, (bounds.y_max - bounds.y_min) / res as f64);
    let diag = (dx * dx + dy * dy).sqrt();
    let mut curve = boundary_curve(h, 4096)?;
    // chords no longer than a quarter cell keep the band and the scanline honest
    curve = densify(h, curve, 0.25 * dx.min(dy));
    let band = boundary_band(&curve, &bounds, res, BAND_DIAGONALS * diag);
    let xs: Vec<f64> = (0..res).map(|c| cell_center(&bounds, res, 0, c).re).collect();
    let rows: Vec<Vec<i64>> = (0..res)
        .into_par_iter()
        .map(|r| scanline_row(&curve, cell_center(&bounds, res, r, 0).im, &xs))
        .collect();
    let mut cells = vec![None; res * res];
    for r in 0..res {
        for c in 0..res {
            if band[r * res + c] {
                continue;
            }
            let w = rows[r][c];
            if w < 0 {
                return Err(LabError::AmbiguousWinding { value: w as f64 });
            }
            cells[r * res + c] = Some(w as u32);
        }
    }

    // root-count cross-check
    let stride = res.div_ceil(400).max(1);
    let probes: Vec<usize> = (0..res * res)
        .filter(|&i| cells[i].is_some() && (i / res) % stride == 0 && (i % res) % stride == 0)
        .collect();
    let checks: Vec<Result<Option<(usize, usize)>>> = probes
        .par_iter()
        .map(|&i| {
            let p = cell_center(&bounds, res, i / res, i % res);
            match h.fiber(p) {
                Ok(f) => Ok(Some((i, f.count()))),
                Err(LabError::Domain(_)) | Err(LabError::DegreeCap { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut probed = 0;
    for chk in checks {
        if let Some((i, count)) = chk? {
            probed += 1;
            let idx = cells[i].unwrap();
            if idx as usize != count {
                return Err(LabError::IndexMismatch {
                    winding: idx as i64,
                    roots: count,
                });
            }
        }
    }

    let regions = flood_regions(&cells, res, &bounds)?;
    Ok(IndexMap {
        bounds,
        resolution: res,
        cells,
        boundary: curve,
        branch_values: branch_values(h).unwrap_or_default(),
        regions,
        probed,
    })
}

fn densify(h: &impl Holomorphic, curve: Vec<C>, max_chord: f64) -> Vec<C> {
    let n = curve.len();
    let longest = (0..n).map(|k| (curve[(k + 1) % n] - curve[k]).norm()).fold(0.0, f64::max);
    if longest <= max_chord {
        return curve;
    }
    let factor = (longest / max_chord).ceil() as usize;
    let samples = (4096 * factor).min(1 << 22);
    let pts: Vec<C> = (0..samples)
        .into_par_iter()
        .map(|k| on_circle(h, TAU * k as f64 / samples as f64))
        .collect();
    pts
}

fn flood_regions(cells: &[Option<u32>], res: usize, bounds: &Bounds) -> Result<Vec<Region>> {
    let mut seen = vec![false; cells.len()];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..cells.len() {
        let Some(index) = cells[start] else { continue };
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut count = 0;
        while let Some(i) = stack.pop() {
            count += 1;
            if cells[i] != Some(index) {
                return Err(LabError::RegionNotConstant { region: regions.len() });
            }
            let (r, c) = (i / res, i % res);
            let mut push = |j: usize| {
                if !seen[j] && cells[j].is_some() {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - res);
            }
            if r + 1 < res {
                push(i + res);
            }
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < res {
                push(i + 1);
            }
        }
        regions.push(Region {
            index,
            cells: count,
            sample: cell_center(bounds, res, start / res, start % res),
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaschke::{BlaschkeProduct, MoebiusTransform};
    use crate::series::FunctionSpec;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn poly(c: &[f64]) -> FunctionSpec {
        FunctionSpec::Poly(c.iter().map(|&x| C::new(x, 0.0)).collect())
    }

    fn figure() -> FunctionSpec {
        poly(&[2.0, 1.0, 1.0])
    }

    #[test]
    fn curve_of_identity_is_circle() {
        let pts = boundary_curve(&poly(&[0.0, 1.0]), 256).unwrap();
        assert!(pts.len() >= 256);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
        assert!(boundary_curve(&poly(&[0.0, 1.0]), 100).is_err());
    }

    #[test]
    fn figure_probes() {
        let h = figure();
        assert_eq!(winding_index(&h, c(1.66, 0.0)).unwrap(), 2);
        assert_eq!(winding_index(&h, c(5.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_index(&h, c(2.5, 0.0)).unwrap(), 1);
        // ω = 2 = h(−1) lies on h(𝕋)
        assert!(matches!(winding_index(&h, c(2.0, 0.0)), Err(LabError::MarginViolation { .. })));
        let zc = zero_count(&h, c(2.0, 0.0)).unwrap();
        assert_eq!(zc.count, 1);
        assert!(!zc.near_boundary.is_empty());
        assert_eq!(winding_index(&h, c(2.0 + 1e-3, 0.0)).unwrap(), 1);
        assert_eq!(winding_index(&h, c(2.0 - 1e-3, 0.0)).unwrap(), 2);
    }

    #[test]
    fn branch_value_examples() {
        let bv = branch_values(&figure()).unwrap();
        assert_eq!(bv.len(), 1);
        assert!((bv[0] - c(1.75, 0.0)).norm() < 1e-12);
        let bv = branch_values(&poly(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(bv, vec![c(0.0, 0.0)]);
        let m = FunctionSpec::Blaschke(MoebiusTransform::new(c(0.3, 0.1), 0.2).unwrap().as_blaschke().clone());
        assert!(branch_values(&m).unwrap().is_empty());
    }

    #[test]
    fn identity_map() {
        let m = index_map(&poly(&[0.0, 1.0]), Bounds::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 64).unwrap();
        assert_eq!(m.nonzero_indices(), vec![1]);
        assert_eq!(m.lookup(c(0.0, 0.0)), Some(Some(1)));
        assert_eq!(m.lookup(c(1.8, 1.8)), Some(Some(0)));
        assert_eq!(m.lookup(c(1.0, 0.0)), Some(None));
    }

    #[test]
    fn square_map() {
        let m = index_map(&poly(&[0.0, 0.0, 1.0]), Bounds::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 64).unwrap();
        assert_eq!(m.nonzero_indices(), vec![2]);
        assert_eq!(m.lookup(c(0.3, -0.2)), Some(Some(2)));
    }

    #[test]
    fn figure_map_two_regions() {
        let m = index_map(&figure(), Bounds::new(-1.0, 5.0, -3.0, 3.0).unwrap(), 200).unwrap();
        assert_eq!(m.nonzero_indices(), vec![1, 2]);
        assert_eq!(m.lookup(c(1.66, 0.0)), Some(Some(2)));
        assert_eq!(m.lookup(c(4.9, 2.9)), Some(Some(0)));
        assert!(m.probed > 1000);
    }

    #[test]
    fn blaschke_sum_rule() {
        let b = BlaschkeProduct::new(vec![c(0.0, 0.0), c(0.5, 0.0), c(-0.2, 0.4)], 0.7).unwrap();
        let spec = FunctionSpec::Blaschke(b);
        for w in [c(0.0, 0.0), c(0.5, 0.5), c(-0.9, 0.1)] {
            assert_eq!(winding_index(&spec, w).unwrap(), 3);
        }
        assert_eq!(winding_index(&spec, c(1.5, 0.0)).unwrap(), 0);
    }

    #[test]
    fn moebius_precomposition_keeps_map() {
        let phi = FunctionSpec::Blaschke(MoebiusTransform::new(c(0.3, -0.2), 0.4).unwrap().as_blaschke().clone());
        let g = FunctionSpec::compose(figure(), phi);
        let b = Bounds::new(-1.0, 5.0, -3.0, 3.0).unwrap();
        let m1 = index_map(&figure(), b, 80).unwrap();
        let m2 = index_map(&g, b, 80).unwrap();
        let mut compared = 0;
        for (a, b) in m1.cells.iter().zip(&m2.cells) {
            if let (Some(a), Some(b)) = (a, b) {
                assert_eq!(a, b);
                compared += 1;
            }
        }
        assert!(compared > 5000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn winding_matches_root_count(c0 in -1.0f64..1.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -1.0f64..1.0, wr in -2.0f64..2.0, wi in -2.0f64..2.0) {
            let h = poly(&[c0, c1, c2, c3]);
            let omega = c(wr, wi);
            // agreement is enforced inside; only boundary proximity may refuse
            match winding(&h, omega) {
                Ok(w) => prop_assert_eq!(Some(w.index as usize), w.root_count),
                Err(LabError::MarginViolation { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn winding_constant_on_short_segments(t in 0.0f64..1.0) {
            let h = figure();
            // both probes lie in the index-2 loop well away from the curve
            let p = c(1.62 + 0.06 * t, 0.02 * t);
            prop_assert_eq!(winding_index(&h, p).unwrap(), 2);
        }
    }
}
