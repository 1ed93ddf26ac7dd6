//! Toy multisections over the trivial bundle `U × ℝʳ → U` on a chart:
//! solution sets of `f = s_j`, the weight function `λ_f = Λ ∘ f`, the
//! invariant `Ψ_f(ω, τ) = ∫_{S} ω − ∫_{∂S} τ` and a homotopy harness.
//!
//! Zero-dimensional solutions carry `sign det D(f − s_j)`. A solution curve
//! is oriented so that `(tangent, ∇(f − s_j))` is a positive frame.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::branched::BranchingStructure;
use crate::error::{Error, Result};
use crate::expr::SmoothMap;
use crate::forms::{DifferentialForm, FormField, FormShape};
use crate::geometry::{tol, Branch, Chart, ChartDomain, Factor, Orientation, ParamDomain, Parametrization};
use crate::linalg;
use crate::measure::{boundary_measure, chart_measure, global_boundary_measure, global_measure, Integrator, PartitionOfUnity, Region};
use crate::quadrature::compensated_sum;
use crate::rational::format_rational;
use crate::report::Report;
use crate::scalar::{self, Real};
use crate::Rational;

/// Smallest `|det|` (or gradient norm) accepted at a solution.
const TRANSVERSALITY: f64 = 1e-8;
/// Matching tolerance between `e` and `s_j(x)` in [`lambda_value`].
const FIBER_MATCH: f64 = 1e-9;

/// A section `f: U → ℝʳ` of the trivial bundle over a box chart.
#[derive(Clone, Debug)]
pub struct ToySection<T> {
    chart: Arc<Chart<T>>,
    map: SmoothMap,
}

impl<T: Real> ToySection<T> {
    pub fn new(chart: Arc<Chart<T>>, map: SmoothMap) -> Result<Self> {
        if map.arity() != chart.dim() {
            return Err(Error::Dimension(format!("section has arity {} on ℝ^{}", map.arity(), chart.dim())));
        }
        if map.coarity() == 0 || map.coarity() > chart.dim() {
            return Err(Error::Dimension(format!("fiber rank {} is not in 1..={}", map.coarity(), chart.dim())));
        }
        if !matches!(chart.domain(), ChartDomain::Box { .. }) {
            return Err(Error::Unsupported("sections are solved on box charts".into()));
        }
        Ok(ToySection { chart, map })
    }

    pub fn chart(&self) -> &Arc<Chart<T>> {
        &self.chart
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn fiber_dim(&self) -> usize {
        self.map.coarity()
    }

    fn bounds(&self) -> (&[T], &[T]) {
        match self.chart.domain() {
            ChartDomain::Box { lo, hi } => (lo, hi),
            _ => unreachable!("checked at construction"),
        }
    }
}

/// Local sections `s_j` with positive weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Multisection {
    sections: Vec<SmoothMap>,
    weights: Vec<Rational>,
}

impl Multisection {
    pub fn new(sections: Vec<SmoothMap>, weights: Vec<Rational>) -> Result<Self> {
        if sections.is_empty() || sections.len() != weights.len() {
            return Err(Error::Precondition("need one weight per section and at least one section".into()));
        }
        let (n, r) = (sections[0].arity(), sections[0].coarity());
        if sections.iter().any(|s| s.arity() != n || s.coarity() != r) {
            return Err(Error::Dimension("sections must share arity and fiber rank".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w <= Rational::from_integer(0)) {
            return Err(Error::Precondition(format!("weight {} is not positive", format_rational(w))));
        }
        let total: Rational = weights.iter().sum();
        if total != Rational::from_integer(1) {
            return Err(Error::Precondition(format!("weights sum to {}, not 1", format_rational(&total))));
        }
        Ok(Multisection { sections, weights })
    }

    /// The single zero section with weight 1.
    pub fn trivial(base_dim: usize, fiber_dim: usize) -> Self {
        let zero = vec!["0"; fiber_dim];
        Multisection { sections: vec![SmoothMap::parse(base_dim, &zero).expect("constant map")], weights: vec![Rational::from_integer(1)] }
    }

    pub fn sections(&self) -> &[SmoothMap] {
        &self.sections
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }
}

/// `Λ_x(e) = Σ_{j : s_j(x) = e} σ_j`; zero when nothing matches.
pub fn lambda_value<T: Real>(m: &Multisection, x: &[T], e: &[T]) -> Result<Rational> {
    let eps: T = tol(FIBER_MATCH);
    let mut total = Rational::from_integer(0);
    for (s, w) in m.sections.iter().zip(&m.weights) {
        if scalar::dist(&s.eval(x)?, e) <= eps {
            total += w;
        }
    }
    Ok(total)
}

/// `λ_f(x) = Λ_x(f(x))`.
pub fn lambda_f<T: Real>(f: &ToySection<T>, m: &Multisection, x: &[T]) -> Result<Rational> {
    lambda_value(m, x, &f.map.eval(x)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionPoint<T> {
    pub section: usize,
    pub point: Vec<T>,
    pub sign: i8,
}

/// A connected solution curve of `f = s_j`, split into branches so that each
/// endpoint on the box boundary is a boundary face.
#[derive(Clone, Debug)]
pub struct SolutionCurve<T> {
    pub section: usize,
    pub closed: bool,
    pub points: Vec<Vec<T>>,
    pub branches: Vec<Branch<T>>,
}

/// Zero sets `Z_j = {f = s_j}` with inherited weights.
#[derive(Clone, Debug)]
pub struct SolutionSet<T> {
    pub dim: usize,
    pub weights: Vec<Rational>,
    pub points: Vec<SolutionPoint<T>>,
    pub curves: Vec<SolutionCurve<T>>,
}

impl<T: Real> SolutionSet<T> {
    /// `Θ(x) = Σ σ_j` over the `Z_j` containing `x`.
    pub fn theta(&self, x: &[T], eps: T) -> Result<Rational> {
        let mut hit = vec![false; self.weights.len()];
        for p in &self.points {
            if scalar::dist(&p.point, x) <= eps {
                hit[p.section] = true;
            }
        }
        for c in &self.curves {
            for b in &c.branches {
                if b.project(x)?.distance <= eps {
                    hit[c.section] = true;
                }
            }
        }
        Ok(hit.iter().zip(&self.weights).filter(|(h, _)| **h).map(|(_, w)| *w).sum())
    }

    /// The curves as a branching structure on `chart` (one-dimensional case).
    pub fn structure(&self, chart: Arc<Chart<T>>) -> Result<Option<BranchingStructure<T>>> {
        if self.dim != 1 {
            return Err(Error::Dimension("only curve solution sets form a branching structure".into()));
        }
        let mut branches = Vec::new();
        let mut weights = Vec::new();
        for c in &self.curves {
            for b in &c.branches {
                branches.push(b.clone());
                weights.push(self.weights[c.section]);
            }
        }
        if branches.is_empty() {
            return Ok(None);
        }
        Ok(Some(BranchingStructure::new(chart, branches, weights)?))
    }
}

fn residual<T: Real>(f: &SmoothMap, s: &SmoothMap, x: &[T]) -> Result<Vec<T>> {
    Ok(f.eval(x)?.iter().zip(s.eval(x)?).map(|(&a, b)| a - b).collect())
}

fn residual_jacobian<T: Real>(f: &SmoothMap, s: &SmoothMap, x: &[T]) -> Result<Vec<Vec<T>>> {
    let jf = f.jacobian(x)?;
    let js = s.jacobian(x)?;
    Ok(jf.iter().zip(&js).map(|(a, b)| a.iter().zip(b).map(|(&u, &v)| u - v).collect()).collect())
}

fn sign_of<T: Real>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else {
        -1
    }
}

struct Problem<'a, T> {
    f: &'a SmoothMap,
    s: &'a SmoothMap,
    lo: &'a [T],
    hi: &'a [T],
    resolution: usize,
}

impl<T: Real> Problem<'_, T> {
    fn h(&self, x: &[T]) -> Result<Vec<T>> {
        residual(self.f, self.s, x)
    }

    fn jac(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        residual_jacobian(self.f, self.s, x)
    }

    fn step(&self, axis: usize) -> T {
        (self.hi[axis] - self.lo[axis]) / T::of_usize(self.resolution)
    }

    fn grid(&self, axis: usize, k: usize) -> T {
        if k == self.resolution {
            self.hi[axis]
        } else {
            self.lo[axis] + self.step(axis) * T::of_usize(k)
        }
    }

    fn not_transverse(&self, x: &[T], what: &str) -> Error {
        Error::GoodPosition(format!("{what} at {:?}", scalar::to_f64_vec(x)))
    }

    /// Roots of a scalar `h` on `[lo, hi]`: bracketing on the grid plus
    /// safeguarded Newton, with tangential zeros rejected.
    fn roots_1d(&self) -> Result<Vec<SolutionPoint<T>>> {
        let g = |x: T| -> Result<T> { Ok(self.h(&[x])?[0]) };
        let dg = |x: T| -> Result<T> { Ok(self.jac(&[x])?[0][0]) };
        let floor: T = tol(TRANSVERSALITY);
        let xs: Vec<T> = (0..=self.resolution).map(|k| self.grid(0, k)).collect();
        let vs = xs.iter().map(|&x| g(x)).collect::<Result<Vec<_>>>()?;
        let ds = xs.iter().map(|&x| dg(x)).collect::<Result<Vec<_>>>()?;
        let mut roots: Vec<T> = Vec::new();
        for k in 0..self.resolution {
            let (a, b) = (xs[k], xs[k + 1]);
            let (va, vb) = (vs[k], vs[k + 1]);
            if va == T::zero() && (k == 0 || roots.last() != Some(&a)) {
                roots.push(a);
            }
            if va * vb < T::zero() {
                roots.push(bracketed_root(&g, &dg, a, b, va)?);
            }
            if k + 1 == self.resolution && vb == T::zero() {
                roots.push(b);
            }
            // a critical point with a tiny value is a tangency the grid cannot bracket
            if ds[k] * ds[k + 1] < T::zero() {
                let c = bracketed_root(&dg, &|x| self.second(x), a, b, ds[k])?;
                let vc = g(c)?;
                if vc.abs() <= floor {
                    return Err(self.not_transverse(&[c], "tangential zero"));
                }
            }
        }
        let mut out = Vec::with_capacity(roots.len());
        for x in roots {
            let d = dg(x)?;
            if d.abs() < floor {
                return Err(self.not_transverse(&[x], "degenerate zero"));
            }
            out.push(SolutionPoint { section: 0, point: vec![x], sign: sign_of(d) });
        }
        Ok(out)
    }

    fn second(&self, x: T) -> Result<T> {
        let d =
            self.f.second_directional(&[x], &[T::one()], &[T::one()])?[0] - self.s.second_directional(&[x], &[T::one()], &[T::one()])?[0];
        Ok(d)
    }

    /// Newton from every cell centre of the grid; square systems.
    fn roots_square(&self) -> Result<Vec<SolutionPoint<T>>> {
        let n = self.lo.len();
        let floor: T = tol(TRANSVERSALITY);
        let accept: T = tol(1e-11);
        let merge = tol::<T>(1e-7) * scalar::dist(self.lo, self.hi);
        let cells = self.resolution.pow(n as u32);
        let found: Vec<Option<Vec<T>>> = (0..cells)
            .into_par_iter()
            .map(|c| -> Result<Option<Vec<T>>> {
                let mut idx = c;
                let mut x = vec![T::zero(); n];
                for (a, xa) in x.iter_mut().enumerate() {
                    let k = idx % self.resolution;
                    idx /= self.resolution;
                    *xa = self.lo[a] + self.step(a) * (T::of_usize(k) + T::lit(0.5));
                }
                for _ in 0..60 {
                    let h = self.h(&x)?;
                    if scalar::norm(&h) <= T::epsilon() {
                        break;
                    }
                    let Some(dx) = linalg::solve(&self.jac(&x)?, &h) else { return Ok(None) };
                    for (xa, d) in x.iter_mut().zip(&dx) {
                        *xa -= *d;
                    }
                    if !x.iter().all(|v| v.is_finite()) || scalar::norm(&dx) <= T::epsilon() * (T::one() + scalar::norm(&x)) {
                        break;
                    }
                }
                let inside = x.iter().zip(self.lo.iter().zip(self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b);
                Ok((inside && scalar::norm(&self.h(&x)?) <= accept).then_some(x))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut roots: Vec<Vec<T>> = Vec::new();
        for x in found.into_iter().flatten() {
            if roots.iter().all(|r| scalar::dist(r, &x) > merge) {
                roots.push(x);
            }
        }
        let mut out = Vec::with_capacity(roots.len());
        for x in roots {
            let d = linalg::det(&self.jac(&x)?);
            if d.abs() < floor {
                return Err(self.not_transverse(&x, "degenerate zero"));
            }
            out.push(SolutionPoint { section: 0, sign: sign_of(d), point: x });
        }
        Ok(out)
    }

    /// Pulls a point onto `{h = 0}` along the gradient.
    fn snap(&self, mut x: Vec<T>) -> Result<Vec<T>> {
        for _ in 0..20 {
            let h = self.h(&x)?[0];
            if h.abs() <= T::epsilon() {
                break;
            }
            let g = self.jac(&x)?.remove(0);
            let g2 = linalg::dot(&g, &g);
            if g2 <= T::zero() {
                break;
            }
            for (xa, ga) in x.iter_mut().zip(&g) {
                *xa -= h * *ga / g2;
            }
        }
        Ok(x)
    }

    /// Marching squares on the planar grid; returns ordered point chains.
    fn curves_2d(&self) -> Result<Vec<(Vec<Vec<T>>, bool)>> {
        let r = self.resolution;
        let val = |i: usize, j: usize| -> Result<T> {
            let v = self.h(&[self.grid(0, i), self.grid(1, j)])?[0];
            Ok(if v == T::zero() { T::min_positive_value() } else { v })
        };
        let mut values = vec![vec![T::zero(); r + 1]; r + 1];
        for (i, row) in values.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = val(i, j)?;
            }
        }
        // edge ids: horizontal (i,j)-(i+1,j) then vertical (i,j)-(i,j+1)
        let horizontal = |i: usize, j: usize| j * r + i;
        let vertical = |i: usize, j: usize| r * (r + 1) + i * r + j;
        let mut crossing: std::collections::BTreeMap<usize, Vec<T>> = Default::default();
        let mut cross = |id: usize, a: (usize, usize), b: (usize, usize)| -> Result<bool> {
            let (va, vb) = (values[a.0][a.1], values[b.0][b.1]);
            if va * vb >= T::zero() {
                return Ok(false);
            }
            if let std::collections::btree_map::Entry::Vacant(e) = crossing.entry(id) {
                let pa = [self.grid(0, a.0), self.grid(1, a.1)];
                let pb = [self.grid(0, b.0), self.grid(1, b.1)];
                let along = |t: T| -> Result<T> {
                    let p: Vec<T> = pa.iter().zip(&pb).map(|(&u, &v)| u + (v - u) * t).collect();
                    self.h(&p).map(|h| h[0])
                };
                let mut lo = (T::zero(), va);
                let mut hi = T::one();
                for _ in 0..200 {
                    let mid = (lo.0 + hi) * T::lit(0.5);
                    if mid <= lo.0 || mid >= hi {
                        break;
                    }
                    let vm = along(mid)?;
                    if vm * lo.1 > T::zero() {
                        lo = (mid, vm);
                    } else {
                        hi = mid;
                    }
                }
                let t = (lo.0 + hi) * T::lit(0.5);
                let p: Vec<T> = pa.iter().zip(&pb).map(|(&u, &v)| u + (v - u) * t).collect();
                e.insert(self.snap(p)?);
            }
            Ok(true)
        };
        let mut links: Vec<(usize, usize)> = Vec::new();
        for j in 0..r {
            for i in 0..r {
                let edges = [
                    (horizontal(i, j), (i, j), (i + 1, j)),
                    (vertical(i + 1, j), (i + 1, j), (i + 1, j + 1)),
                    (horizontal(i, j + 1), (i + 1, j + 1), (i, j + 1)),
                    (vertical(i, j), (i, j + 1), (i, j)),
                ];
                let mut hits = Vec::new();
                for (id, a, b) in edges {
                    if cross(id, a, b)? {
                        hits.push(id);
                    }
                }
                match hits.len() {
                    0 => {}
                    2 => links.push((hits[0], hits[1])),
                    4 => {
                        let centre = [self.grid(0, i) + self.step(0) * T::lit(0.5), self.grid(1, j) + self.step(1) * T::lit(0.5)];
                        let vc = self.h(&centre)?[0];
                        // corners 0 and 2 share a sign; join around the corners of the other sign
                        if vc * values[i][j] > T::zero() {
                            links.push((hits[0], hits[1]));
                            links.push((hits[2], hits[3]));
                        } else {
                            links.push((hits[3], hits[0]));
                            links.push((hits[1], hits[2]));
                        }
                    }
                    _ => unreachable!("a square has an even number of sign changes"),
                }
            }
        }
        let mut adjacent: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (l, &(a, b)) in links.iter().enumerate() {
            adjacent.entry(a).or_default().push(l);
            adjacent.entry(b).or_default().push(l);
        }
        let mut used = vec![false; links.len()];
        let mut chains = Vec::new();
        let walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
            let mut chain = vec![start];
            let mut at = start;
            while let Some(&l) = adjacent[&at].iter().find(|&&l| !used[l]) {
                used[l] = true;
                at = if links[l].0 == at { links[l].1 } else { links[l].0 };
                chain.push(at);
            }
            chain
        };
        for (&e, ls) in &adjacent {
            if ls.len() == 1 && !used[ls[0]] {
                chains.push((walk(e, &mut used), false));
            }
        }
        for l in 0..links.len() {
            if !used[l] {
                let mut chain = walk(links[l].0, &mut used);
                chain.pop();
                chains.push((chain, true));
            }
        }
        let min_gap = tol::<T>(1e-6) * self.step(0).min(self.step(1));
        Ok(chains
            .into_iter()
            .map(|(ids, closed)| {
                let mut pts: Vec<Vec<T>> = Vec::with_capacity(ids.len());
                for id in ids {
                    let p = crossing[&id].clone();
                    if pts.last().is_none_or(|q| scalar::dist(q, &p) > min_gap) {
                        pts.push(p);
                    }
                }
                if closed && pts.len() > 1 && scalar::dist(&pts[0], pts.last().unwrap()) <= min_gap {
                    pts.pop();
                }
                (pts, closed)
            })
            .collect())
    }

    /// Orientation making `(tangent, ∇h)` positive, checked on every segment.
    fn curve(&self, mut pts: Vec<Vec<T>>, closed: bool, resolution: usize) -> Result<SolutionCurve<T>> {
        let floor: T = tol(TRANSVERSALITY);
        let segments = if closed { pts.len() } else { pts.len() - 1 };
        let mut votes = 0i64;
        for k in 0..segments {
            let (a, b) = (&pts[k], &pts[(k + 1) % pts.len()]);
            let mid: Vec<T> = a.iter().zip(b).map(|(&u, &v)| (u + v) * T::lit(0.5)).collect();
            let g = self.jac(&mid)?.remove(0);
            if scalar::norm(&g) < floor {
                return Err(self.not_transverse(&mid, "singular solution curve"));
            }
            let t = [b[0] - a[0], b[1] - a[1]];
            votes += sign_of(t[0] * g[1] - t[1] * g[0]) as i64;
        }
        if votes < 0 {
            pts.reverse();
        }
        let branches = polyline_branches(&pts, closed, resolution)?;
        Ok(SolutionCurve { section: 0, closed, points: pts, branches })
    }
}

fn bracketed_root<T: Real>(g: &dyn Fn(T) -> Result<T>, dg: &dyn Fn(T) -> Result<T>, mut a: T, mut b: T, ga: T) -> Result<T> {
    let target: T = tol(1e-12);
    let mut x = (a + b) * T::lit(0.5);
    for _ in 0..200 {
        let v = g(x)?;
        if v.abs() <= target * T::lit(1e-3) || v == T::zero() {
            return Ok(x);
        }
        if v * ga > T::zero() {
            a = x;
        } else {
            b = x;
        }
        let d = dg(x)?;
        let newton = x - v / d;
        let next = if d != T::zero() && newton > a && newton < b { newton } else { (a + b) * T::lit(0.5) };
        if next == x || b - a <= T::epsilon() * (T::one() + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Closed chains become one periodic branch. Open chains are split at their
/// middle into two branches starting at the endpoints, so both endpoints are
/// boundary faces with the induced orientations.
fn polyline_branches<T: Real>(pts: &[Vec<T>], closed: bool, resolution: usize) -> Result<Vec<Branch<T>>> {
    let sub = resolution.max(1);
    if closed {
        let n = pts.len();
        let domain = ParamDomain::new(vec![Factor::Periodic { start: T::zero(), period: T::of_usize(n) }])?;
        let param = Parametrization::Polyline { points: pts.to_vec(), closed: true };
        return Ok(vec![Branch::new(domain, param, Orientation::Positive, n * sub)?]);
    }
    let mut pts = pts.to_vec();
    if pts.len() < 2 {
        return Err(Error::GoodPosition("solution curve collapsed to a point".into()));
    }
    if (pts.len() - 1) % 2 == 1 {
        let k = (pts.len() - 1) / 2;
        let mid: Vec<T> = pts[k].iter().zip(&pts[k + 1]).map(|(&u, &v)| (u + v) * T::lit(0.5)).collect();
        pts.insert(k + 1, mid);
    }
    let half = (pts.len() - 1) / 2;
    let mut out = Vec::with_capacity(2);
    // the face at s = 0 of a forward quadrant branch gets the reversed sign
    for (chain, orientation) in
        [(pts[..=half].to_vec(), Orientation::Positive), (pts[half..].iter().rev().cloned().collect::<Vec<_>>(), Orientation::Negative)]
    {
        let domain = ParamDomain::new(vec![Factor::Quadrant { extent: T::of_usize(half) }])?;
        let param = Parametrization::Polyline { points: chain, closed: false };
        out.push(Branch::new(domain, param, orientation, half * sub)?);
    }
    Ok(out)
}

/// Per-section zero sets of `f − s_j` on the chart's box. `resolution` is the
/// grid size per axis used for bracketing, multistart or marching.
pub fn solve<T: Real>(f: &ToySection<T>, m: &Multisection, resolution: usize) -> Result<SolutionSet<T>> {
    let n = f.chart.dim();
    let r = f.fiber_dim();
    if m.sections[0].arity() != n || m.sections[0].coarity() != r {
        return Err(Error::Dimension("multisection does not match the section's bundle".into()));
    }
    if resolution == 0 {
        return Err(Error::Precondition("resolution must be positive".into()));
    }
    let dim = n - r;
    if dim > 1 || (dim == 1 && n != 2) {
        return Err(Error::Unsupported(format!("solution sets of dimension {dim} in ℝ^{n}")));
    }
    let (lo, hi) = f.bounds();
    let per_section = m
        .sections
        .par_iter()
        .map(|s| -> Result<(Vec<SolutionPoint<T>>, Vec<(Vec<Vec<T>>, bool)>)> {
            let p = Problem { f: &f.map, s, lo, hi, resolution };
            match (dim, n) {
                (0, 1) => Ok((p.roots_1d()?, Vec::new())),
                (0, _) => Ok((p.roots_square()?, Vec::new())),
                _ => Ok((Vec::new(), p.curves_2d()?)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = SolutionSet { dim, weights: m.weights.clone(), points: Vec::new(), curves: Vec::new() };
    for (j, (points, chains)) in per_section.into_iter().enumerate() {
        let p = Problem { f: &f.map, s: &m.sections[j], lo, hi, resolution };
        for mut pt in points {
            pt.section = j;
            set.points.push(pt);
        }
        for (pts, closed) in chains {
            if pts.len() < if closed { 3 } else { 2 } {
                continue;
            }
            let mut c = p.curve(pts, closed, 1)?;
            c.section = j;
            set.curves.push(c);
        }
    }
    Ok(set)
}

/// `Ψ` with its parts; `exact` is set when every evaluated form is constant
/// and the solution set is finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Psi<T> {
    pub value: T,
    pub interior: T,
    pub boundary: T,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub exact: Option<Rational>,
    pub solution_dim: usize,
    pub components: usize,
}

fn serialize_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

/// `Ψ_f(ω, τ) = μ_ω(S(f, λ)) − μ_τ(∂S(f, λ))`. For finite solution sets `ω`
/// is a 0-form and the integral is `(1/#G_e) Σ σ_j · sign · ω(x)`.
pub fn invariant_psi<T: Real>(
    solutions: &SolutionSet<T>,
    chart: &Arc<Chart<T>>,
    omega: &DifferentialForm,
    tau: Option<&DifferentialForm>,
    cover: Option<&PartitionOfUnity<T>>,
    integrator: &Integrator<T>,
) -> Result<Psi<T>> {
    let ge = Rational::from_integer(chart.effective_quotient()?.effective_order as i64);
    if solutions.dim == 0 {
        if omega.degree() != 0 || omega.dim() != chart.dim() {
            return Err(Error::Dimension("finite solution sets integrate 0-forms".into()));
        }
        let mut terms = Vec::with_capacity(solutions.points.len());
        let mut signed = Rational::from_integer(0);
        for p in &solutions.points {
            let w = solutions.weights[p.section] * Rational::from_integer(p.sign as i64) / ge;
            let mut v = <DifferentialForm as FormField<T>>::eval(omega, &p.point, &[])?;
            if let Some(g) = cover {
                v *= compensated_sum(g.values(&p.point)?);
            }
            terms.push(T::of_rational(&w) * v);
            signed += w;
        }
        let value = compensated_sum(terms);
        let exact = omega.constant_function().map(|c| c * signed);
        return Ok(Psi { value, interior: value, boundary: T::zero(), exact, solution_dim: 0, components: solutions.points.len() });
    }
    let Some(s) = solutions.structure(chart.clone())? else {
        return Ok(Psi {
            value: T::zero(),
            interior: T::zero(),
            boundary: T::zero(),
            exact: Some(Rational::from_integer(0)),
            solution_dim: solutions.dim,
            components: 0,
        });
    };
    let interior = match cover {
        Some(g) => global_measure(&s, omega, g, integrator)?.value,
        None => chart_measure(&s, omega, &Region::All, integrator)?.value,
    };
    let boundary = match (tau, cover) {
        (None, _) => T::zero(),
        (Some(t), Some(g)) => global_boundary_measure(&s, t, g, integrator)?.value,
        (Some(t), None) => boundary_measure(&s, t, &Region::All, integrator)?.value,
    };
    Ok(Psi { value: interior - boundary, interior, boundary, exact: None, solution_dim: solutions.dim, components: solutions.curves.len() })
}

/// `Ψ(t)` along `f_t` for `t = k/(steps−1)`. `homotopy` has the base
/// variables followed by `t`. Every zero must stay inside the box
/// `compact`; non-transverse samples are flagged and excluded.
#[allow(clippy::too_many_arguments)]
pub fn homotopy_invariance_check<T: Real>(
    chart: &Arc<Chart<T>>,
    homotopy: &SmoothMap,
    m: &Multisection,
    omega: &DifferentialForm,
    tau: Option<&DifferentialForm>,
    compact: (&[T], &[T]),
    steps: usize,
    resolution: usize,
    integrator: &Integrator<T>,
    tolerance: T,
) -> Result<Report> {
    if homotopy.arity() != chart.dim() + 1 {
        return Err(Error::Dimension("homotopy takes the base coordinates and t".into()));
    }
    if steps < 2 {
        return Err(Error::Precondition("need at least two t-samples".into()));
    }
    let mut report = Report::new("homotopy_invariance_check", tolerance.as_f64());
    let mut values: Vec<(Rational, T)> = Vec::with_capacity(steps);
    let mut flagged = 0usize;
    let last = (steps - 1) as i64;
    for k in 0..steps {
        let t = Rational::new(k as i64, last);
        let tf = T::of_rational(&t);
        let f = ToySection::new(chart.clone(), homotopy.fix_trailing(&[t])?)?;
        let solutions = match solve(&f, m, resolution) {
            Ok(s) => s,
            Err(Error::GoodPosition(why)) => {
                flagged += 1;
                report.witness(format!("not in good position at t = {}: {why}", format_rational(&t)), &[tf], tf);
                continue;
            }
            Err(e) => return Err(e),
        };
        let escaped = solutions
            .points
            .iter()
            .map(|p| &p.point)
            .chain(solutions.curves.iter().flat_map(|c| &c.points))
            .find(|x| !x.iter().zip(compact.0.iter().zip(compact.1)).all(|(v, (a, b))| v >= a && v <= b));
        if let Some(x) = escaped {
            return Err(Error::Properness { t: tf.as_f64(), point: scalar::to_f64_vec(x) });
        }
        let psi = invariant_psi(&solutions, chart, omega, tau, None, integrator)?;
        values.push((t, psi.value));
    }
    let Some(&(_, first)) = values.first() else {
        report.fail();
        report.value("flagged", T::of_usize(flagged));
        return Ok(report);
    };
    let mut deviation = T::zero();
    for &(t, v) in &values {
        let d = (v - first).abs();
        if d > deviation {
            deviation = d;
        }
        if d > tolerance {
            report.witness(format!("Ψ({}) differs from Ψ at the first sample", format_rational(&t)), &[T::of_rational(&t)], d);
        }
    }
    report.value("samples", T::of_usize(steps));
    report.value("flagged", T::of_usize(flagged));
    report.value("psi_first", first);
    report.value("max_deviation", deviation);
    if deviation > tolerance {
        report.fail();
    }
    Ok(report)
}
