//! Weighted branching structures on a chart, the weight function `Θ`, and
//! good/bad point classification.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{check_group_invariance, tol, Branch, Chart, Projection};
use crate::linalg;
use crate::rational::format_rational;
use crate::report::Report;
use crate::scalar::{self, Real};
use crate::Rational;

/// Numeric stand-ins for the set-theoretic conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Distance within which a point counts as lying on a branch.
    pub membership: T,
    /// Hausdorff distance below which two branch patches coincide.
    pub coincidence: T,
    /// Largest subspace gap (≈ principal angle, radians) for equal tangent spaces.
    pub angle: T,
}

impl<T: Real> Tolerances<T> {
    /// `1e-7·diameter`, ten times that, and `1e-5`.
    pub fn for_diameter(diameter: T) -> Self {
        let membership = (T::lit(1e-7) * diameter).max(T::lit(1000.0) * T::epsilon() * diameter);
        Tolerances { membership, coincidence: T::lit(10.0) * membership, angle: tol(1e-5) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Class {
    Good,
    Bad,
}

/// Classification of a support point with its incidence set `I_x` and the
/// coincidence partition `P_x` (both as branch indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointClass {
    pub class: Class,
    pub incident: Vec<usize>,
    pub partition: Vec<Vec<usize>>,
}

/// A finite family of equal-dimensional branches with positive rational weights.
#[derive(Clone, Debug)]
pub struct BranchingStructure<T> {
    chart: Arc<Chart<T>>,
    branches: Vec<Branch<T>>,
    weights: Vec<Rational>,
    tolerances: Tolerances<T>,
}

impl<T: Real> BranchingStructure<T> {
    /// Validates dimensions, weights, containment in the chart, group
    /// invariance of the union and orientation compatibility.
    pub fn new(chart: Arc<Chart<T>>, branches: Vec<Branch<T>>, weights: Vec<Rational>) -> Result<Self> {
        let tolerances = Tolerances::for_diameter(chart.domain().diameter());
        Self::with_tolerances(chart, branches, weights, tolerances)
    }

    pub fn with_tolerances(
        chart: Arc<Chart<T>>,
        branches: Vec<Branch<T>>,
        weights: Vec<Rational>,
        tolerances: Tolerances<T>,
    ) -> Result<Self> {
        let s = Self::unchecked(chart, branches, weights, tolerances)?;
        let eps = s.tolerances.membership;
        for (i, b) in s.branches.iter().enumerate() {
            if let Some((_, p)) = b.vertices().iter().find(|(_, p)| !s.chart.domain().contains(p, eps)) {
                return Err(Error::Structure(format!("branch {i} leaves the chart domain at {p:?}")));
            }
        }
        let inv = check_group_invariance(&s.chart, &s.branches, eps)?;
        if !inv.pass {
            let at = inv.witnesses.first().map(|w| format!(" at {:?}", w.point)).unwrap_or_default();
            return Err(Error::Structure(format!(
                "union of branches is not group invariant (violation {}{at})",
                inv.get("max_violation").unwrap_or(f64::NAN)
            )));
        }
        s.check_orientations()?;
        Ok(s)
    }

    /// Checks only the data that does not involve geometry: equal dimensions,
    /// ambient dimension, weight positivity. Used for restrictions to
    /// sub-neighbourhoods, where branches may leave the smaller chart.
    pub fn unchecked(chart: Arc<Chart<T>>, branches: Vec<Branch<T>>, weights: Vec<Rational>, tolerances: Tolerances<T>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Structure("a branching structure needs at least one branch".into()));
        }
        if branches.len() != weights.len() {
            return Err(Error::Structure(format!("{} branches but {} weights", branches.len(), weights.len())));
        }
        let n = branches[0].dim();
        if branches.iter().any(|b| b.dim() != n) {
            return Err(Error::Structure("all branches must have the same dimension".into()));
        }
        if let Some(b) = branches.iter().position(|b| b.ambient_dim() != chart.dim()) {
            return Err(Error::Dimension(format!("branch {b} does not live in the chart's ℝ^{}", chart.dim())));
        }
        if let Some(w) = weights.iter().find(|w| **w <= Rational::from_integer(0)) {
            return Err(Error::Structure(format!("weight {} is not positive", format_rational(w))));
        }
        Ok(BranchingStructure { chart, branches, weights, tolerances })
    }

    pub fn chart(&self) -> &Arc<Chart<T>> {
        &self.chart
    }

    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn tolerances(&self) -> Tolerances<T> {
        self.tolerances
    }

    pub fn dim(&self) -> usize {
        self.branches[0].dim()
    }

    /// Same structure with every branch re-meshed at `resolution`.
    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        let branches = self.branches.iter().map(|b| b.with_resolution(resolution)).collect::<Result<Vec<_>>>()?;
        Ok(BranchingStructure { branches, ..self.clone() })
    }

    /// Same branches and weights viewed in another chart (no validation
    /// beyond [`BranchingStructure::unchecked`]).
    pub fn restricted(&self, chart: Arc<Chart<T>>) -> Result<Self> {
        Self::unchecked(chart, self.branches.clone(), self.weights.clone(), self.tolerances)
    }

    fn check_orientations(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Ok(());
        }
        let rank_tol: T = tol(1e-9);
        for g in 0..self.chart.order() {
            if g == self.chart.group().identity {
                continue;
            }
            let phi = self.chart.element(g);
            for (i, b) in self.branches.iter().enumerate() {
                for cell in b.domain().mesh(b.resolution())?.cells {
                    let q = cell.center();
                    let (x, cols) = b.parametrization().tangents(&q)?;
                    let y = phi.eval(&x)?;
                    let pushed = cols.iter().map(|c| phi.directional(&x, c)).collect::<Result<Vec<_>>>()?;
                    let pushed_basis = linalg::orthonormalize(&pushed, rank_tol);
                    for (j, proj) in self.incident(&y)? {
                        let target = &self.branches[j];
                        let (_, frame) = target.parametrization().tangents(&proj.param)?;
                        let basis = linalg::orthonormalize(&frame, rank_tol);
                        if linalg::subspace_gap(&pushed_basis, &basis) > self.tolerances.angle {
                            continue;
                        }
                        let gram = linalg::gram(&frame);
                        let mut coeffs = Vec::with_capacity(n);
                        for w in &pushed {
                            let rhs: Vec<T> = frame.iter().map(|f| linalg::dot(f, w)).collect();
                            coeffs.push(
                                linalg::solve(&gram, &rhs)
                                    .ok_or_else(|| Error::Structure(format!("branch {j} is singular at {:?}", proj.param)))?,
                            );
                        }
                        let sign = linalg::det(&coeffs) * b.orientation().factor::<T>() * target.orientation().factor::<T>();
                        if sign <= T::zero() {
                            return Err(Error::Structure(format!(
                                "element {} maps branch {i} onto branch {j} reversing orientation at {x:?}",
                                self.chart.group().names[g]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Branches passing within the membership tolerance of `x`, with the projections.
    pub fn incident(&self, x: &[T]) -> Result<Vec<(usize, Projection<T>)>> {
        let mut out = Vec::new();
        for (i, b) in self.branches.iter().enumerate() {
            let p = b.project(x)?;
            if p.distance <= self.tolerances.membership {
                out.push((i, p));
            }
        }
        Ok(out)
    }

    /// `Θ(x) = Σ_{i: x ∈ Mᵢ} σᵢ`, exactly.
    pub fn theta(&self, x: &[T]) -> Result<Rational> {
        Ok(self.incident(x)?.iter().fold(Rational::from_integer(0), |acc, (i, _)| acc + self.weights[*i]))
    }

    /// Cell centres of every branch mesh: the points at which `Θ` is compared
    /// (cell centres avoid the measure-zero sets where branches meet).
    pub fn support_samples(&self) -> Result<Vec<Vec<T>>> {
        let mut out = Vec::new();
        for b in &self.branches {
            for cell in b.domain().mesh(b.resolution())?.cells {
                out.push(b.eval(&cell.center())?);
            }
        }
        Ok(out)
    }

    /// `Θ(φ_g x) = Θ(x)` for every group element and up to `count` support samples.
    pub fn check_theta_invariance(&self, count: usize) -> Result<Report> {
        let mut report = Report::new("theta_invariance", 0.0);
        let samples = self.support_samples()?;
        let stride = (samples.len() / count.max(1)).max(1);
        let mut violations = 0usize;
        for x in samples.iter().step_by(stride).take(count) {
            let t = self.theta(x)?;
            for g in 0..self.chart.order() {
                let y = self.chart.act(g, x)?;
                let ty = self.theta(&y)?;
                if ty != t {
                    violations += 1;
                    report.fail();
                    report.witness(format!("Θ = {} but Θ(φ_{}) = {}", format_rational(&t), g, format_rational(&ty)), x, T::zero());
                }
            }
        }
        report.value("violations", T::of_usize(violations));
        Ok(report)
    }

    /// Good/bad classification at `x` with test radius `r` in parameter space.
    pub fn classify_point(&self, x: &[T], r: T) -> Result<PointClass> {
        let incident = self.incident(x)?;
        if incident.is_empty() {
            return Err(Error::NotOnSupport { point: scalar::to_f64_vec(x) });
        }
        let idx: Vec<usize> = incident.iter().map(|(i, _)| *i).collect();
        let mut parent: Vec<usize> = (0..idx.len()).collect();
        fn find(p: &mut [usize], mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        let patches = incident.iter().map(|(i, p)| self.patch(*i, &p.param, r)).collect::<Result<Vec<_>>>()?;
        let tangents = incident.iter().map(|(i, p)| self.tangent_basis(*i, &p.param)).collect::<Result<Vec<_>>>()?;
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                if self.coincide(idx[a], &patches[a], &tangents[a], idx[b], &patches[b], &tangents[b])? {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        for a in 0..idx.len() {
            let root = find(&mut parent, a);
            match roots.iter().position(|&r| r == root) {
                Some(k) => classes[k].push(idx[a]),
                None => {
                    roots.push(root);
                    classes.push(vec![idx[a]]);
                }
            }
        }
        let class = if classes.len() == 1 { Class::Good } else { Class::Bad };
        Ok(PointClass { class, incident: idx, partition: classes })
    }

    fn patch(&self, branch: usize, q: &[T], r: T) -> Result<Vec<Vec<T>>> {
        let b = &self.branches[branch];
        let n = q.len();
        let per_axis: usize = match n {
            0 => 1,
            1 => 9,
            2 => 5,
            _ => 3,
        };
        let half = (per_axis / 2) as i64;
        let mut out = Vec::new();
        let mut counter = vec![0usize; n];
        loop {
            let offset: Vec<T> = counter.iter().map(|&c| r * T::lit((c as i64 - half) as f64) / T::lit(half.max(1) as f64)).collect();
            if scalar::norm(&offset) <= r * (T::one() + T::epsilon()) {
                let mut p: Vec<T> = q.iter().zip(&offset).map(|(&a, &o)| a + o).collect();
                b.domain().normalize(&mut p);
                if b.domain().contains(&p, T::zero()) {
                    out.push(b.eval(&p)?);
                }
            }
            let mut k = 0;
            while k < n {
                counter[k] += 1;
                if counter[k] < per_axis {
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        Ok(out)
    }

    fn tangent_basis(&self, branch: usize, q: &[T]) -> Result<Vec<Vec<T>>> {
        let (_, cols) = self.branches[branch].parametrization().tangents(q)?;
        Ok(linalg::orthonormalize(&cols, tol(1e-9)))
    }

    fn coincide(&self, i: usize, patch_i: &[Vec<T>], tan_i: &[Vec<T>], j: usize, patch_j: &[Vec<T>], tan_j: &[Vec<T>]) -> Result<bool> {
        let angle = self.tolerances.angle;
        if linalg::subspace_gap(tan_i, tan_j) > angle || linalg::subspace_gap(tan_j, tan_i) > angle {
            return Ok(false);
        }
        let eps = self.tolerances.coincidence;
        for p in patch_i {
            if self.branches[j].project(p)?.distance > eps {
                return Ok(false);
            }
        }
        for p in patch_j {
            if self.branches[i].project(p)?.distance > eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One orthonormal tangent basis per coincidence class at `x`.
    pub fn tangent_branches(&self, x: &[T], r: T) -> Result<Vec<Vec<Vec<T>>>> {
        let class = self.classify_point(x, r)?;
        let incident = self.incident(x)?;
        class
            .partition
            .iter()
            .map(|members| {
                let i = members[0];
                let proj = &incident.iter().find(|(k, _)| *k == i).expect("incident branch").1;
                if proj.distance > self.tolerances.membership {
                    return Err(Error::NotOnSupport { point: scalar::to_f64_vec(x) });
                }
                self.tangent_basis(i, &proj.param)
            })
            .collect()
    }

    /// Fraction of mesh vertices (all branches, re-meshed at `resolution`)
    /// that are bad points for test radius `r`.
    pub fn bad_set_density(&self, resolution: usize, r: T) -> Result<T> {
        let s = self.with_resolution(resolution)?;
        let mut total = 0usize;
        let mut bad = 0usize;
        for b in &s.branches {
            for (_, x) in b.vertices() {
                total += 1;
                if s.classify_point(x, r)?.class == Class::Bad {
                    bad += 1;
                }
            }
        }
        Ok(T::of_usize(bad) / T::of_usize(total.max(1)))
    }
}

/// First sample where the two structures present different `Θ`, if any.
pub fn theta_mismatch<T: Real>(s1: &BranchingStructure<T>, s2: &BranchingStructure<T>) -> Result<Option<(Vec<T>, Rational, Rational)>> {
    let mut samples = s1.support_samples()?;
    samples.extend(s2.support_samples()?);
    for x in samples {
        let (a, b) = (s1.theta(&x)?, s2.theta(&x)?);
        if a != b {
            return Ok(Some((x, a, b)));
        }
    }
    Ok(None)
}

/// Disjoint union with all weights halved; requires both structures to present the same `Θ`.
pub fn halved_union<T: Real>(s1: &BranchingStructure<T>, s2: &BranchingStructure<T>) -> Result<BranchingStructure<T>> {
    if s1.chart.dim() != s2.chart.dim() || s1.chart.group() != s2.chart.group() {
        return Err(Error::Structure("structures live on different charts".into()));
    }
    if s1.dim() != s2.dim() {
        return Err(Error::Structure("structures have different dimensions".into()));
    }
    if let Some((x, a, b)) = theta_mismatch(s1, s2)? {
        return Err(Error::ThetaMismatch { point: scalar::to_f64_vec(&x), left: format_rational(&a), right: format_rational(&b) });
    }
    let half = Rational::new(1, 2);
    let mut branches = s1.branches.clone();
    branches.extend(s2.branches.iter().cloned());
    let weights = s1.weights.iter().chain(&s2.weights).map(|w| w * half).collect();
    BranchingStructure::unchecked(s1.chart.clone(), branches, weights, s1.tolerances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::SmoothMap;
    use crate::geometry::{ChartDomain, Factor, GroupAction, Orientation, ParamDomain, Parametrization};

    fn plane() -> Arc<Chart<f64>> {
        Arc::new(Chart::trivial(ChartDomain::Box { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] }).unwrap())
    }

    fn graph(lo: f64, hi: f64, y: &str, resolution: usize) -> Branch<f64> {
        let d = ParamDomain::new(vec![Factor::Interval { lo, hi }]).unwrap();
        Branch::new(d, Parametrization::Map(SmoothMap::parse(1, &["x0", y]).unwrap()), Orientation::Positive, resolution).unwrap()
    }

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q)
    }

    fn cubic_pair() -> BranchingStructure<f64> {
        BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 16), graph(-1.0, 1.0, "x0^3", 16)], vec![r(1, 3), r(2, 3)]).unwrap()
    }

    #[test]
    fn theta_sums_incident_weights() {
        let s = cubic_pair();
        assert_eq!(s.theta(&[0.5, 0.0]).unwrap(), r(1, 3));
        assert_eq!(s.theta(&[0.5, 0.125]).unwrap(), r(2, 3));
        assert_eq!(s.theta(&[0.0, 0.0]).unwrap(), r(1, 1));
        assert_eq!(s.theta(&[1.5, 1.5]).unwrap(), r(0, 1));
        let dup = BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 8); 2], vec![r(1, 2); 2]).unwrap();
        assert_eq!(dup.theta(&[0.2, 0.0]).unwrap(), r(1, 1));
    }

    #[test]
    fn structure_validation() {
        assert!(BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 4)], vec![r(0, 1)]).is_err());
        let d2 = ParamDomain::new(vec![Factor::Interval { lo: 0.0, hi: 1.0 }; 2]).unwrap();
        let square = Branch::new(d2, Parametrization::Map(SmoothMap::identity(2)), Orientation::Positive, 2).unwrap();
        assert!(BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 4), square], vec![r(1, 1); 2]).is_err());
        assert!(BranchingStructure::new(plane(), vec![graph(-1.0, 3.0, "0", 4)], vec![r(1, 1)]).is_err());
        let refl = GroupAction {
            elements: vec![SmoothMap::identity(2), SmoothMap::parse(2, &["x0", "-x1"]).unwrap()],
            table: vec![vec![0, 1], vec![1, 0]],
            identity: 0,
            names: vec!["e".into(), "r".into()],
        };
        let chart = Arc::new(Chart::new(ChartDomain::Box { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] }, refl).unwrap());
        assert!(BranchingStructure::new(chart.clone(), vec![graph(-1.0, 1.0, "1", 4)], vec![r(1, 1)]).is_err());
        assert!(BranchingStructure::new(chart, vec![graph(-1.0, 1.0, "0", 4)], vec![r(1, 1)]).is_ok());
    }

    #[test]
    fn orientation_reversing_symmetry_rejected() {
        let flip = GroupAction {
            elements: vec![SmoothMap::identity(2), SmoothMap::parse(2, &["-x0", "x1"]).unwrap()],
            table: vec![vec![0, 1], vec![1, 0]],
            identity: 0,
            names: vec!["e".into(), "f".into()],
        };
        let chart = Arc::new(Chart::new(ChartDomain::Box { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] }, flip).unwrap());
        let err = BranchingStructure::new(chart, vec![graph(-1.0, 1.0, "0", 4)], vec![r(1, 1)]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err:?}");
    }

    #[test]
    fn classification_examples() {
        let s = cubic_pair();
        let c = s.classify_point(&[0.5, 0.0], 0.1).unwrap();
        assert_eq!(c.class, Class::Good);
        assert_eq!(c.partition, vec![vec![0]]);
        let c = s.classify_point(&[0.0, 0.0], 0.1).unwrap();
        assert_eq!(c.class, Class::Bad);
        assert_eq!(c.partition, vec![vec![0], vec![1]]);
        let dup = BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "x0^2", 8); 2], vec![r(1, 2); 2]).unwrap();
        let c = dup.classify_point(&[0.3, 0.09], 0.1).unwrap();
        assert_eq!(c.class, Class::Good);
        assert_eq!(c.partition, vec![vec![0, 1]]);
        assert!(matches!(s.classify_point(&[0.5, 0.5], 0.1), Err(Error::NotOnSupport { .. })));
    }

    #[test]
    fn classification_is_order_independent() {
        let s = cubic_pair();
        let swapped =
            BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "x0^3", 16), graph(-1.0, 1.0, "0", 16)], vec![r(2, 3), r(1, 3)])
                .unwrap();
        for x in [[0.0, 0.0], [0.25, 0.0], [0.25, 0.015625]] {
            let a = s.classify_point(&x, 0.1).unwrap();
            let b = swapped.classify_point(&x, 0.1).unwrap();
            assert_eq!(a.class, b.class);
            assert_eq!(a.partition.len(), b.partition.len());
        }
    }

    #[test]
    fn tangent_branches_examples() {
        let s = cubic_pair();
        let t = s.tangent_branches(&[0.0, 0.0], 0.1).unwrap();
        assert_eq!(t.len(), 2);
        for basis in &t {
            assert!((basis[0][0].abs() - 1.0).abs() < 1e-12 && basis[0][1].abs() < 1e-12);
        }
        let cross =
            BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "x0", 8), graph(-1.0, 1.0, "-x0", 8)], vec![r(1, 1); 2]).unwrap();
        let t = cross.tangent_branches(&[0.0, 0.0], 0.1).unwrap();
        assert_eq!(t.len(), 2);
        assert!(linalg::subspace_gap(&t[0], &t[1]) > 0.5);
    }

    #[test]
    fn bad_fraction_examples() {
        let single = BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 8)], vec![r(1, 1)]).unwrap();
        assert_eq!(single.bad_set_density(16, 0.1).unwrap(), 0.0);
        let cross =
            BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "x0", 8), graph(-1.0, 1.0, "-x0", 8)], vec![r(1, 1); 2]).unwrap();
        // the two crossing vertices out of 2·(res+1)
        assert_eq!(cross.bad_set_density(16, 0.1).unwrap(), 2.0 / 34.0);
        let f8 = cubic_pair().bad_set_density(8, 0.1).unwrap();
        let f16 = cubic_pair().bad_set_density(16, 0.1).unwrap();
        assert_eq!(f8, 2.0 / 18.0);
        assert_eq!(f16, 2.0 / 34.0);
    }

    #[test]
    fn halved_union_examples() {
        let one = BranchingStructure::new(plane(), vec![graph(-1.0, 1.0, "0", 8)], vec![r(1, 1)]).unwrap();
        let u = halved_union(&one, &one).unwrap();
        assert_eq!(u.weights(), &[r(1, 2), r(1, 2)]);
        assert_eq!(u.theta(&[0.3, 0.0]).unwrap(), r(1, 1));
        let split = BranchingStructure::new(plane(), vec![graph(-1.0, 0.0, "0", 4), graph(0.0, 1.0, "0", 4)], vec![r(1, 1); 2]).unwrap();
        let u = halved_union(&one, &split).unwrap();
        for x in u.support_samples().unwrap() {
            assert_eq!(u.theta(&x).unwrap(), r(1, 1));
        }
        let cubic = BranchingStructure::new(plane(), vec![graph(-1.0, 0.0, "0", 4), graph(0.0, 1.0, "x0^3", 4)], vec![r(1, 1); 2]).unwrap();
        match halved_union(&one, &cubic) {
            Err(Error::ThetaMismatch { point, left, right }) => {
                assert!(point[0] > 0.0);
                assert_ne!(left, right);
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn theta_invariance_under_reflection() {
        let refl = GroupAction {
            elements: vec![SmoothMap::identity(2), SmoothMap::parse(2, &["x0", "-x1"]).unwrap()],
            table: vec![vec![0, 1], vec![1, 0]],
            identity: 0,
            names: vec!["e".into(), "r".into()],
        };
        let chart = Arc::new(Chart::new(ChartDomain::Box { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] }, refl).unwrap());
        let branches = vec![graph(-1.0, 1.0, "x0^2", 16), graph(-1.0, 1.0, "-x0^2", 16), graph(-1.0, 1.0, "0", 16)];
        let s = BranchingStructure::new(chart, branches, vec![r(1, 4), r(1, 4), r(1, 2)]).unwrap();
        let rep = s.check_theta_invariance(256).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
