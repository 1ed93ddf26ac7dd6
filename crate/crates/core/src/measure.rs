//! Canonical measures `μ_ω(K) = (1/#G_e) Σᵢ σᵢ ∫_{Kᵢ} ω|Mᵢ`, boundary
//! measures, partitions of unity, Stokes residuals and the comparison
//! verifiers (independence, restriction, morphism invariance).
//!
//! Integrals are tensor Gauss–Legendre sums over the branch meshes. Cells are
//! integrated in parallel and reduced with compensated summation in mesh
//! order, so results do not depend on the number of threads.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::branched::{halved_union, theta_mismatch, BranchingStructure, Class};
use crate::error::{Error, Result};
use crate::expr::SmoothMap;
use crate::forms::{check_form_invariance, form_relatedness, FormField};
use crate::geometry::{tol, Branch, Chart, ChartDomain, GroupAction};
use crate::quadrature::{compensated_sum, GaussRule};
use crate::rational::format_rational;
use crate::report::Report;
use crate::scalar::{self, Real};
use crate::Rational;

/// Quadrature settings: Gauss order per cell and axis, and a multiplier on
/// every branch's mesh resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Integrator<T> {
    pub order: usize,
    pub refine: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real> Default for Integrator<T> {
    fn default() -> Self {
        Self::new(5, 1)
    }
}

impl<T: Real> Integrator<T> {
    pub fn new(order: usize, refine: usize) -> Self {
        Integrator { order: order.max(1), refine: refine.max(1), _scalar: std::marker::PhantomData }
    }

    pub fn resolution(&self, branch: &Branch<T>) -> usize {
        branch.resolution() * self.refine
    }
}

type Predicate<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;

/// The set `K` a measure is evaluated on.
#[derive(Clone)]
pub enum Region<T> {
    All,
    /// Linear cell indices per branch, at the integrator's resolution.
    Cells(Vec<Vec<usize>>),
    /// Ambient points where the predicate holds (sampled at quadrature nodes).
    Predicate(Predicate<T>),
}

impl<T> fmt::Debug for Region<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::All => f.write_str("All"),
            Region::Cells(c) => f.debug_tuple("Cells").field(c).finish(),
            Region::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl<T: Real> Region<T> {
    pub fn predicate(p: impl Fn(&[T]) -> bool + Send + Sync + 'static) -> Self {
        Region::Predicate(Arc::new(p))
    }

    fn includes_cell(&self, branch: usize, cell: usize) -> bool {
        match self {
            Region::Cells(c) => c.get(branch).is_some_and(|cells| cells.contains(&cell)),
            _ => true,
        }
    }

    fn includes_point(&self, x: &[T]) -> bool {
        match self {
            Region::Predicate(p) => p(x),
            _ => true,
        }
    }

    /// Whether an ambient point of the support lies in the region.
    fn contains_support_point(&self, s: &BranchingStructure<T>, integrator: &Integrator<T>, x: &[T]) -> Result<bool> {
        match self {
            Region::All => Ok(true),
            Region::Predicate(p) => Ok(p(x)),
            Region::Cells(cells) => {
                for (j, proj) in s.incident(x)? {
                    let b = &s.branches()[j];
                    if let Some(c) = b.domain().cell_index(&proj.param, integrator.resolution(b)) {
                        if cells.get(j).is_some_and(|cs| cs.contains(&c)) {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
        }
    }

    /// The smallest group-saturated region containing this one.
    pub fn saturate(&self, s: &BranchingStructure<T>, integrator: &Integrator<T>) -> Result<Region<T>> {
        match self {
            Region::All => Ok(Region::All),
            Region::Predicate(p) => {
                let p = p.clone();
                let group = s.chart().group().clone();
                Ok(Region::predicate(move |x| group.elements.iter().any(|g| g.eval(x).map(|y| p(&y)).unwrap_or(false))))
            }
            Region::Cells(cells) => {
                let mut out: Vec<Vec<usize>> = vec![Vec::new(); s.branches().len()];
                for (i, b) in s.branches().iter().enumerate() {
                    let mesh = b.domain().mesh(integrator.resolution(b))?;
                    for &c in cells.get(i).map(Vec::as_slice).unwrap_or(&[]) {
                        let cell = mesh.cells.get(c).ok_or_else(|| Error::Precondition(format!("cell {c} out of range")))?;
                        let x = b.eval(&cell.center())?;
                        for g in 0..s.chart().order() {
                            let y = s.chart().act(g, &x)?;
                            for (j, proj) in s.incident(&y)? {
                                let bj = &s.branches()[j];
                                if let Some(k) = bj.domain().cell_index(&proj.param, integrator.resolution(bj)) {
                                    if !out[j].contains(&k) {
                                        out[j].push(k);
                                    }
                                }
                            }
                        }
                    }
                }
                for v in &mut out {
                    v.sort_unstable();
                }
                Ok(Region::Cells(out))
            }
        }
    }
}

/// One term `σᵢ/#G_e · ∫_{Kᵢ} ω|Mᵢ` of a canonical measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contribution<T> {
    /// Index of the cover set for glued measures.
    pub set: Option<usize>,
    pub branch: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub prefactor: Rational,
    pub integral: T,
}

fn serialize_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureResult<T> {
    pub value: T,
    pub contributions: Vec<Contribution<T>>,
    /// Difference against the rule one order lower.
    pub error_estimate: T,
}

impl<T: Real> MeasureResult<T> {
    fn from_contributions(contributions: Vec<Contribution<T>>, error_estimate: T) -> Self {
        let value = compensated_sum(contributions.iter().map(|c| T::of_rational(&c.prefactor) * c.integral));
        MeasureResult { value, contributions, error_estimate }
    }
}

type Density<'a, T> = Option<&'a (dyn Fn(&[T]) -> Result<T> + Sync)>;

fn check_degree<T: Real, F: FormField<T>>(form: &F, chart: &Chart<T>, degree: usize) -> Result<()> {
    if form.dim() != chart.dim() {
        return Err(Error::Dimension(format!("form on ℝ^{} but chart in ℝ^{}", form.dim(), chart.dim())));
    }
    if form.degree() != degree {
        return Err(Error::Dimension(format!("expected a {degree}-form, got degree {}", form.degree())));
    }
    Ok(())
}

/// `sign · Σ_cells Σ_nodes w · ω(Φ(q))(∂₁Φ … ∂ₙΦ) · density(Φ(q))` over the
/// region's cells of a branch meshed at `resolution`.
fn integrate_cells<T: Real, F: FormField<T>>(
    form: &F,
    branch: &Branch<T>,
    index: usize,
    region: &Region<T>,
    resolution: usize,
    order: usize,
    density: Density<'_, T>,
) -> Result<T> {
    let rule = GaussRule::<T>::new(order);
    let mesh = branch.domain().mesh(resolution)?;
    let param = branch.parametrization();
    let cell_values: Vec<T> = mesh
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, cell)| -> Result<T> {
            if !region.includes_cell(index, c) {
                return Ok(T::zero());
            }
            let mut terms = Vec::with_capacity(rule.order().pow(cell.lo.len() as u32));
            for (q, w) in cell.nodes(&rule) {
                let (x, cols) = param.tangents(&q)?;
                if !region.includes_point(&x) {
                    continue;
                }
                let mut v = form.eval(&x, &cols)?;
                if let Some(f) = density {
                    v *= f(&x)?;
                }
                terms.push(w * v);
            }
            Ok(compensated_sum(terms))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(branch.orientation().factor::<T>() * compensated_sum(cell_values))
}

/// `∫_{K} ω|M` for a single oriented branch.
pub fn integrate_branch<T: Real, F: FormField<T>>(
    form: &F,
    branch: &Branch<T>,
    region: &Region<T>,
    integrator: &Integrator<T>,
) -> Result<T> {
    if form.degree() != branch.dim() || form.dim() != branch.ambient_dim() {
        return Err(Error::Dimension(format!(
            "cannot integrate a {}-form on ℝ^{} over a {}-dimensional branch in ℝ^{}",
            form.degree(),
            form.dim(),
            branch.dim(),
            branch.ambient_dim()
        )));
    }
    integrate_cells(form, branch, 0, region, integrator.resolution(branch), integrator.order, None)
}

/// Checks `x ∈ K ⟹ φ_g(x) ∈ K` at every quadrature node of `K`.
pub fn check_saturated<T: Real>(s: &BranchingStructure<T>, region: &Region<T>, integrator: &Integrator<T>) -> Result<()> {
    if matches!(region, Region::All) || s.chart().order() == 1 {
        return Ok(());
    }
    let rule = GaussRule::<T>::new(integrator.order);
    for (i, b) in s.branches().iter().enumerate() {
        let mesh = b.domain().mesh(integrator.resolution(b))?;
        for (c, cell) in mesh.cells.iter().enumerate() {
            if !region.includes_cell(i, c) {
                continue;
            }
            for (q, _) in cell.nodes(&rule) {
                let x = b.eval(&q)?;
                if !region.includes_point(&x) {
                    continue;
                }
                for g in 0..s.chart().order() {
                    let y = s.chart().act(g, &x)?;
                    if !region.contains_support_point(s, integrator, &y)? {
                        return Err(Error::NotSaturated { element: g, point: scalar::to_f64_vec(&x) });
                    }
                }
            }
        }
    }
    Ok(())
}

fn effective_order<T: Real>(chart: &Chart<T>) -> Result<Rational> {
    Ok(Rational::from_integer(chart.effective_quotient()?.effective_order as i64))
}

fn structure_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
    density: Density<'_, T>,
    set: Option<usize>,
) -> Result<MeasureResult<T>> {
    check_degree(form, s.chart(), s.dim())?;
    check_saturated(s, region, integrator)?;
    let ge = effective_order(s.chart())?;
    let mut contributions = Vec::with_capacity(s.branches().len());
    let mut estimate = Vec::with_capacity(s.branches().len());
    for (i, (b, w)) in s.branches().iter().zip(s.weights()).enumerate() {
        let res = integrator.resolution(b);
        let integral = integrate_cells(form, b, i, region, res, integrator.order, density)?;
        let prefactor = w / ge;
        if integrator.order > 1 {
            let lower = integrate_cells(form, b, i, region, res, integrator.order - 1, density)?;
            estimate.push(T::of_rational(&prefactor) * (integral - lower).abs());
        }
        contributions.push(Contribution { set, branch: i, prefactor, integral });
    }
    Ok(MeasureResult::from_contributions(contributions, compensated_sum(estimate)))
}

/// `μ_ω(K) = (1/#G_e) Σᵢ σᵢ ∫_{Kᵢ} ω|Mᵢ`; `K` must be group-saturated.
pub fn chart_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    structure_measure(s, form, region, integrator, None, None)
}

/// `∫_K f dμ_ω`, realized by weighting every quadrature node with `f`.
pub fn chart_measure_with_density<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    density: &(dyn Fn(&[T]) -> Result<T> + Sync),
    region: &Region<T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    structure_measure(s, form, region, integrator, Some(density), None)
}

fn structure_boundary_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
    density: Density<'_, T>,
    set: Option<usize>,
) -> Result<MeasureResult<T>> {
    if s.dim() == 0 {
        return Err(Error::Dimension("points have no boundary".into()));
    }
    check_degree(form, s.chart(), s.dim() - 1)?;
    if matches!(region, Region::Cells(_)) {
        return Err(Error::Unsupported("boundary measures take `All` or predicate regions".into()));
    }
    let ge = effective_order(s.chart())?;
    let mut contributions = Vec::new();
    let mut estimate = Vec::new();
    for (i, (b, w)) in s.branches().iter().zip(s.weights()).enumerate() {
        let res = integrator.resolution(b);
        let prefactor = w / ge;
        let mut parts = Vec::new();
        let mut lower_parts = Vec::new();
        for face in b.boundary_faces()? {
            parts.push(integrate_cells(form, &face.branch, i, region, res, integrator.order, density)?);
            if integrator.order > 1 {
                lower_parts.push(integrate_cells(form, &face.branch, i, region, res, integrator.order - 1, density)?);
            }
        }
        let integral = compensated_sum(parts);
        if integrator.order > 1 {
            estimate.push(T::of_rational(&prefactor) * (integral - compensated_sum(lower_parts)).abs());
        }
        contributions.push(Contribution { set, branch: i, prefactor, integral });
    }
    Ok(MeasureResult::from_contributions(contributions, compensated_sum(estimate)))
}

/// `μ_τ(∂K) = (1/#G_e) Σᵢ σᵢ ∫ τ|∂Mᵢ` over the faces of every branch with
/// their induced orientations.
pub fn boundary_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    structure_boundary_measure(s, form, region, integrator, None, None)
}

/// One open set of a cover.
#[derive(Clone, Debug, PartialEq)]
pub enum CoverSet<T> {
    Ball { center: Vec<T>, radius: T },
    Box { lo: Vec<T>, hi: Vec<T> },
}

impl<T: Real> CoverSet<T> {
    fn dim(&self) -> usize {
        match self {
            CoverSet::Ball { center, .. } => center.len(),
            CoverSet::Box { lo, .. } => lo.len(),
        }
    }

    /// The classical bump `exp(1/(r² − 1))`, per axis for boxes.
    fn bump(&self, x: &[T]) -> T {
        let profile = |r2: T| if r2 < T::one() { (T::one() / (r2 - T::one())).exp() } else { T::zero() };
        match self {
            CoverSet::Ball { center, radius } => {
                let d = scalar::dist(x, center) / *radius;
                profile(d * d)
            }
            CoverSet::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).fold(T::one(), |acc, (&v, (&a, &b))| {
                let t = (T::lit(2.0) * v - a - b) / (b - a);
                acc * profile(t * t)
            }),
        }
    }
}

/// Smooth, group-invariant partition of unity subordinate to the saturations of a cover.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity<T> {
    group: GroupAction,
    sets: Vec<CoverSet<T>>,
}

impl<T: Real> PartitionOfUnity<T> {
    pub fn new(chart: &Chart<T>, sets: Vec<CoverSet<T>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Precondition("cover must contain at least one set".into()));
        }
        for (k, set) in sets.iter().enumerate() {
            if set.dim() != chart.dim() {
                return Err(Error::Dimension(format!("cover set {k} has the wrong dimension")));
            }
            let ok = match set {
                CoverSet::Ball { radius, .. } => *radius > T::zero(),
                CoverSet::Box { lo, hi } => lo.iter().zip(hi).all(|(a, b)| a < b),
            };
            if !ok {
                return Err(Error::Precondition(format!("cover set {k} is empty")));
            }
        }
        Ok(PartitionOfUnity { group: chart.group().clone(), sets })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[CoverSet<T>] {
        &self.sets
    }

    /// `f′_α(x) = (1/|G|) Σ_g f_α(φ_g x)` for every set.
    fn averaged(&self, x: &[T]) -> Result<Vec<T>> {
        let images = self.group.elements.iter().map(|g| g.eval(x)).collect::<Result<Vec<_>>>()?;
        let order = T::of_usize(self.group.order());
        Ok(self.sets.iter().map(|set| compensated_sum(images.iter().map(|y| set.bump(y))) / order).collect())
    }

    /// `g_α(x) = f′_α(x) / Σ_β f′_β(x)`; a point no saturated set reaches is a cover gap.
    pub fn values(&self, x: &[T]) -> Result<Vec<T>> {
        let f = self.averaged(x)?;
        let total = compensated_sum(f.iter().copied());
        if !(total > T::zero()) {
            return Err(Error::CoverGap { point: scalar::to_f64_vec(x) });
        }
        Ok(f.into_iter().map(|v| v / total).collect())
    }

    pub fn value(&self, alpha: usize, x: &[T]) -> Result<T> {
        Ok(self.values(x)?[alpha])
    }
}

/// Quadrature nodes on the support of `s` (all branches, mesh order).
pub fn support_nodes<T: Real>(s: &BranchingStructure<T>, integrator: &Integrator<T>) -> Result<Vec<Vec<T>>> {
    let rule = GaussRule::<T>::new(integrator.order);
    let mut out = Vec::new();
    for b in s.branches() {
        for cell in b.domain().mesh(integrator.resolution(b))?.cells {
            for (q, _) in cell.nodes(&rule) {
                out.push(b.eval(&q)?);
            }
        }
    }
    Ok(out)
}

/// Evenly spaced subset of at most `count` support nodes.
pub fn sample_support_nodes<T: Real>(s: &BranchingStructure<T>, integrator: &Integrator<T>, count: usize) -> Result<Vec<Vec<T>>> {
    let nodes = support_nodes(s, integrator)?;
    if nodes.len() <= count {
        return Ok(nodes);
    }
    Ok((0..count).map(|k| nodes[k * nodes.len() / count].clone()).collect())
}

/// Sum-to-one, range and group-invariance checks of a partition of unity at `points`.
pub fn verify_partition_of_unity<T: Real>(pou: &PartitionOfUnity<T>, chart: &Chart<T>, points: &[Vec<T>], tolerance: T) -> Result<Report> {
    let mut report = Report::new("verify_partition_of_unity", tolerance.as_f64());
    let mut sum_defect = T::zero();
    let mut range_defect = T::zero();
    let mut inv_defect = T::zero();
    for x in points {
        let g = pou.values(x)?;
        let total = compensated_sum(g.iter().copied());
        let d = (total - T::one()).abs();
        if d > sum_defect {
            sum_defect = d;
        }
        for &v in &g {
            range_defect = range_defect.max(-v).max(v - T::one());
        }
        for e in 0..chart.order() {
            let y = chart.act(e, x)?;
            let gy = pou.values(&y)?;
            let d = scalar::max_abs_diff(&g, &gy);
            if d > inv_defect {
                inv_defect = d;
                if d > tolerance {
                    report.witness(format!("invariance under {}", chart.group().names[e]), x, d);
                }
            }
        }
    }
    report.value("nodes", T::of_usize(points.len()));
    report.value("sum_defect", sum_defect);
    report.value("range_defect", range_defect);
    report.value("invariance_defect", inv_defect);
    if sum_defect > tol(1e-12) || range_defect > tol(1e-12) || inv_defect > tolerance {
        report.fail();
    }
    Ok(report)
}

fn check_cover<T: Real>(s: &BranchingStructure<T>, pou: &PartitionOfUnity<T>, integrator: &Integrator<T>) -> Result<()> {
    for x in support_nodes(s, integrator)? {
        pou.values(&x)?;
    }
    Ok(())
}

/// `Σ_α μ_{g_α ω}`: the measure glued from a partition of unity.
pub fn global_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    pou: &PartitionOfUnity<T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    global_measure_with_density(s, form, pou, None, integrator)
}

pub fn global_measure_with_density<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    pou: &PartitionOfUnity<T>,
    density: Density<'_, T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    check_cover(s, pou, integrator)?;
    glue(pou, |alpha, weight| structure_measure(s, form, &Region::All, integrator, Some(weight), Some(alpha)), density)
}

/// Boundary counterpart of [`global_measure`].
pub fn global_boundary_measure<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    pou: &PartitionOfUnity<T>,
    integrator: &Integrator<T>,
) -> Result<MeasureResult<T>> {
    glue(pou, |alpha, weight| structure_boundary_measure(s, form, &Region::All, integrator, Some(weight), Some(alpha)), None)
}

fn glue<T: Real>(
    pou: &PartitionOfUnity<T>,
    measure: impl Fn(usize, &(dyn Fn(&[T]) -> Result<T> + Sync)) -> Result<MeasureResult<T>>,
    density: Density<'_, T>,
) -> Result<MeasureResult<T>> {
    let mut contributions = Vec::new();
    let mut estimate = Vec::new();
    for alpha in 0..pou.len() {
        let weight = |x: &[T]| -> Result<T> {
            let g = pou.value(alpha, x)?;
            Ok(match density {
                Some(f) => g * f(x)?,
                None => g,
            })
        };
        let part = measure(alpha, &weight)?;
        estimate.push(part.error_estimate);
        contributions.extend(part.contributions);
    }
    Ok(MeasureResult::from_contributions(contributions, compensated_sum(estimate)))
}

/// Both sides of Stokes' theorem and their difference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StokesResult<T> {
    pub interior: MeasureResult<T>,
    pub boundary: MeasureResult<T>,
    pub residual: T,
}

/// `μ_{dω}(S) − μ_ω(∂S)`, glued with `pou` when given.
pub fn stokes_residual<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    form: &F,
    pou: Option<&PartitionOfUnity<T>>,
    integrator: &Integrator<T>,
) -> Result<StokesResult<T>> {
    let d = crate::forms::Exterior(form);
    let (interior, boundary) = match pou {
        Some(p) => (global_measure(s, &d, p, integrator)?, global_boundary_measure(s, form, p, integrator)?),
        None => (chart_measure(s, &d, &Region::All, integrator)?, boundary_measure(s, form, &Region::All, integrator)?),
    };
    let residual = interior.value - boundary.value;
    Ok(StokesResult { interior, boundary, residual })
}

/// Compares the measures of two structures presenting the same `Θ`.
/// A `Θ` mismatch is an error carrying the witness point.
pub fn verify_independence<T: Real, F: FormField<T>>(
    s1: &BranchingStructure<T>,
    s2: &BranchingStructure<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
    tolerance: T,
) -> Result<Report> {
    let union = halved_union(s1, s2)?;
    let m1 = chart_measure(s1, form, region, integrator)?;
    let m2 = chart_measure(s2, form, region, integrator)?;
    let diff = (m1.value - m2.value).abs();
    let mut report = Report::new("verify_independence", tolerance.as_f64());
    report.value("measure_1", m1.value).value("measure_2", m2.value).value("difference", diff);
    for c in m1.contributions.iter().chain(&m2.contributions) {
        report.prefactor(&c.prefactor);
    }
    let radius = T::lit(1e-2) * s1.chart().domain().diameter();
    let (mut good, mut bad) = (0usize, 0usize);
    for x in union.support_samples()? {
        match union.classify_point(&x, radius)?.class {
            Class::Good => good += 1,
            Class::Bad => bad += 1,
        }
    }
    report.value("good_samples", T::of_usize(good)).value("bad_samples", T::of_usize(bad));
    if diff > tolerance {
        report.fail();
    }
    Ok(report)
}

/// Reports whether two structures present the same `Θ` at their support samples.
pub fn compare_theta<T: Real>(s1: &BranchingStructure<T>, s2: &BranchingStructure<T>) -> Result<Report> {
    let mut report = Report::new("compare_theta", 0.0);
    if let Some((x, a, b)) = theta_mismatch(s1, s2)? {
        report.fail();
        report.witness(format!("Θ₁ = {}, Θ₂ = {}", format_rational(&a), format_rational(&b)), &x, T::zero());
    }
    Ok(report)
}

/// Outcome of a restriction check.
#[derive(Clone, Debug)]
pub struct RestrictionCheck<T> {
    pub stabilizer: Vec<usize>,
    pub cosets: usize,
    pub full_effective_order: usize,
    pub local_effective_order: usize,
    /// `(1/#G_e)·|R|` and `1/#H_e`.
    pub rational_lhs: Rational,
    pub rational_rhs: Rational,
    pub local: MeasureResult<T>,
    pub global: MeasureResult<T>,
    pub report: Report,
}

/// Compares `μ^V(K)` computed in the neighbourhood `v` of `x` with its
/// stabilizer `H` against `μ^U(G·K)` in the full chart.
///
/// `region` is `K`, given on the full structure's branches; it must lie in
/// `v`. `v` must be `H`-invariant with `φ_g(v) ∩ v = ∅` for `g ∉ H`.
pub fn verify_restriction<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    x: &[T],
    v: ChartDomain<T>,
    form: &F,
    region: &Region<T>,
    integrator: &Integrator<T>,
    tolerance: T,
) -> Result<RestrictionCheck<T>> {
    let chart = s.chart();
    let eps = s.tolerances().membership;
    if !v.contains(x, T::zero()) {
        return Err(Error::Precondition("the restriction neighbourhood does not contain the point".into()));
    }
    let stabilizer = chart.stabilizer(x, eps)?;
    let samples = v.samples(crate::geometry::GROUP_SAMPLES * 4, chart.seed());
    for y in samples.iter().chain(std::iter::once(&x.to_vec())) {
        for g in 0..chart.order() {
            let gy = chart.act(g, y)?;
            let inside = v.contains(&gy, -eps);
            if stabilizer.contains(&g) {
                if !v.contains(&gy, eps) {
                    return Err(Error::Precondition(format!(
                        "neighbourhood is not invariant under stabilizer element {}",
                        chart.group().names[g]
                    )));
                }
            } else if inside {
                return Err(Error::RestrictionOverlap { element: g, point: scalar::to_f64_vec(y) });
            }
        }
    }
    let local_chart = Arc::new(chart.subgroup(&stabilizer, v.clone())?);
    let local = s.restricted(local_chart.clone())?;
    // K must sit inside V
    let rule = GaussRule::<T>::new(integrator.order);
    for (i, b) in s.branches().iter().enumerate() {
        for (c, cell) in b.domain().mesh(integrator.resolution(b))?.cells.iter().enumerate() {
            if !region.includes_cell(i, c) {
                continue;
            }
            for (q, _) in cell.nodes(&rule) {
                let p = b.eval(&q)?;
                if region.includes_point(&p) && !v.contains(&p, eps) {
                    return Err(Error::Precondition(format!("region leaves the neighbourhood at {p:?}")));
                }
            }
        }
    }
    let full_eq = chart.effective_quotient()?;
    let local_eq = local_chart.effective_quotient_on(&samples)?;
    let cosets = chart.order() / stabilizer.len();
    let rational_lhs = Rational::new(cosets as i64, full_eq.effective_order as i64);
    let rational_rhs = Rational::new(1, local_eq.effective_order as i64);
    let saturated = region.saturate(s, integrator)?;
    let global = chart_measure(s, form, &saturated, integrator)?;
    let local_measure = chart_measure(&local, form, region, integrator)?;
    let diff = (global.value - local_measure.value).abs();
    let invariance = check_form_invariance(form, chart, tol(1e-9))?;
    let mut report = Report::new("verify_restriction", tolerance.as_f64());
    report
        .value("form_defect", invariance.get("max_defect").unwrap_or(0.0))
        .value("measure_full", global.value)
        .value("measure_local", local_measure.value)
        .value("difference", diff)
        .value("stabilizer_order", T::of_usize(stabilizer.len()))
        .value("cosets", T::of_usize(cosets))
        .value("full_effective_order", T::of_usize(full_eq.effective_order))
        .value("local_effective_order", T::of_usize(local_eq.effective_order));
    report.prefactor(&rational_lhs).prefactor(&rational_rhs);
    if !invariance.pass {
        report.fail();
        for w in invariance.witnesses {
            report.witnesses.push(crate::report::Witness { description: format!("form is not invariant under {}", w.description), ..w });
        }
    }
    if rational_lhs != rational_rhs || diff > tolerance {
        report.fail();
    }
    Ok(RestrictionCheck {
        stabilizer,
        cosets,
        full_effective_order: full_eq.effective_order,
        local_effective_order: local_eq.effective_order,
        rational_lhs,
        rational_rhs,
        local: local_measure,
        global,
        report,
    })
}

/// Pushes the structure forward by the diffeomorphism `phi` (with inverse
/// `phi_inv`), conjugating the group, and compares `μ_ω` on both sides.
/// A form that is not `phi`-invariant is flagged in the report.
pub fn verify_morphism_invariance<T: Real, F: FormField<T>>(
    s: &BranchingStructure<T>,
    phi: &SmoothMap,
    phi_inv: &SmoothMap,
    form: &F,
    integrator: &Integrator<T>,
    tolerance: T,
) -> Result<Report> {
    let chart = s.chart();
    let n = chart.dim();
    if phi.arity() != n || phi.coarity() != n || phi_inv.arity() != n || phi_inv.coarity() != n {
        return Err(Error::Dimension("morphism must map the chart's ℝᴺ to itself".into()));
    }
    let eps: T = tol(1e-9);
    let samples = chart.samples(crate::geometry::GROUP_SAMPLES);
    for x in &samples {
        if scalar::max_abs_diff(&phi_inv.eval(&phi.eval(x)?)?, x) > eps {
            return Err(Error::Precondition("the given inverse does not invert the morphism".into()));
        }
    }
    let mut report = Report::new("verify_morphism_invariance", tolerance.as_f64());
    let points = s.support_samples()?;
    let related = form_relatedness(form, phi, &points, chart.seed(), tolerance)?;
    report.value("form_defect", related.get("max_defect").unwrap_or(0.0));
    if !related.pass {
        report.fail();
        for w in related.witnesses {
            report.witnesses.push(crate::report::Witness { description: "form is not invariant under the morphism".into(), ..w });
        }
    }
    let group = chart.group();
    let conjugated = GroupAction {
        elements: group.elements.iter().map(|g| phi.compose(&g.compose(phi_inv)?)).collect::<Result<Vec<_>>>()?,
        table: group.table.clone(),
        identity: group.identity,
        names: group.names.clone(),
    };
    let image = ChartDomain::Image { base: Box::new(chart.domain().clone()), forward: phi.clone(), inverse: phi_inv.clone() };
    let target_chart = Arc::new(Chart::with_seed(image, conjugated, chart.seed())?);
    let pushed = s.branches().iter().map(|b| b.pushforward(phi)).collect::<Result<Vec<_>>>()?;
    let target = BranchingStructure::with_tolerances(target_chart, pushed, s.weights().to_vec(), s.tolerances())?;
    let before = chart_measure(s, form, &Region::All, integrator)?;
    let after = chart_measure(&target, form, &Region::All, integrator)?;
    let diff = (before.value - after.value).abs();
    report.value("measure_source", before.value).value("measure_target", after.value).value("difference", diff);
    if diff > tolerance {
        report.fail();
    }
    Ok(report)
}
