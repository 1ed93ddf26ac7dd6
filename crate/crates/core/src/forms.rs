//! Differential forms in coordinate-coefficient normal form, pullback,
//! exterior derivative, Lie bracket and the Poincaré homotopy operator.
//!
//! Every evaluator works on [`Jet`]s so that derivatives of anything built
//! here (including quadrature-defined primitives) are exact forward-mode
//! derivatives rather than difference quotients.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr, SmoothMap};
use crate::geometry::{tol, Chart, ChartDomain, GROUP_SAMPLES};
use crate::jet::{self, Jet, Number};
use crate::quadrature::adaptive_gauss;
use crate::report::Report;
use crate::sampling::halton;
use crate::scalar::{self, Real};
use crate::Rational;

/// A smooth function `ℝᴺ → ℝ`, kept symbolic so forms can be combined and
/// differentiated without losing exactness.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Expr(Expr),
    /// `∂/∂x_var` of the inner field, evaluated by forward-mode AD.
    Partial(Box<ScalarField>, usize),
    Sum(Vec<(Rational, ScalarField)>),
    Product(Vec<ScalarField>),
}

impl ScalarField {
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Ok(ScalarField::Expr(parse_expression(text, dim)?))
    }

    pub fn constant(r: Rational) -> Self {
        ScalarField::Expr(Expr::constant(r))
    }

    pub fn as_const(&self) -> Option<Rational> {
        match self {
            ScalarField::Expr(e) => e.as_const(),
            _ => None,
        }
    }

    pub fn partial(&self, var: usize) -> Self {
        if self.as_const().is_some() {
            return ScalarField::constant(Rational::from_integer(0));
        }
        ScalarField::Partial(Box::new(self.clone()), var)
    }

    pub fn times(&self, other: &ScalarField) -> Self {
        if self.as_const() == Some(Rational::from_integer(1)) {
            return other.clone();
        }
        if other.as_const() == Some(Rational::from_integer(1)) {
            return self.clone();
        }
        ScalarField::Product(vec![self.clone(), other.clone()])
    }

    pub fn eval_n<T: Real>(&self, x: &[Jet<T>]) -> Result<Jet<T>> {
        match self {
            ScalarField::Expr(e) => e.eval(x),
            ScalarField::Partial(inner, var) => {
                if *var >= x.len() {
                    return Err(Error::VariableOutOfRange { index: *var, arity: x.len() });
                }
                let dir: Vec<Jet<T>> = (0..x.len()).map(|i| Jet::from_value(if i == *var { T::one() } else { T::zero() })).collect();
                let (_, slope) = jet::directional(x, &dir, |y| Ok(vec![inner.eval_n(y)?]))?;
                Ok(slope.into_iter().next().unwrap_or_else(|| Jet::from_value(T::zero())))
            }
            ScalarField::Sum(terms) => {
                let mut acc = Jet::from_value(T::zero());
                for (c, f) in terms {
                    acc = acc.add(&f.eval_n(x)?.scale(T::of_rational(c)));
                }
                Ok(acc)
            }
            ScalarField::Product(factors) => {
                let mut acc = Jet::from_value(T::one());
                for f in factors {
                    acc = acc.mul(&f.eval_n(x)?);
                }
                Ok(acc)
            }
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T> {
        Ok(self.eval_n(&jet::lift(x))?.value())
    }
}

/// Ambient dimension and degree of a form-like object.
pub trait FormShape {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
}

/// Anything that evaluates like a differential form: `ω(x)(v₁, …, v_k)`.
pub trait FormField<T: Real>: FormShape + Send + Sync {
    /// Evaluation where the point and the vectors may carry infinitesimals.
    fn eval_n(&self, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>>;

    fn eval(&self, x: &[T], vs: &[Vec<T>]) -> Result<T> {
        let lifted: Vec<Vec<Jet<T>>> = vs.iter().map(|v| jet::lift(v)).collect();
        Ok(self.eval_n(&jet::lift(x), &lifted)?.value())
    }
}

impl<F: FormShape + ?Sized> FormShape for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn degree(&self) -> usize {
        (**self).degree()
    }
}

impl<F: FormShape + ?Sized> FormShape for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn degree(&self) -> usize {
        (**self).degree()
    }
}

impl<T: Real, F: FormField<T> + ?Sized> FormField<T> for &F {
    fn eval_n(&self, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        (**self).eval_n(x, vs)
    }
}

impl<T: Real, F: FormField<T> + ?Sized> FormField<T> for Arc<F> {
    fn eval_n(&self, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        (**self).eval_n(x, vs)
    }
}

fn check_args<T: Real, F: FormShape + ?Sized>(form: &F, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<()> {
    if x.len() != form.dim() {
        return Err(Error::Dimension(format!("form on ℝ^{} evaluated at a point of ℝ^{}", form.dim(), x.len())));
    }
    if vs.len() != form.degree() {
        return Err(Error::Dimension(format!("{}-form given {} vectors", form.degree(), vs.len())));
    }
    if let Some(v) = vs.iter().find(|v| v.len() != form.dim()) {
        return Err(Error::Dimension(format!("vector of length {} for a form on ℝ^{}", v.len(), form.dim())));
    }
    Ok(())
}

/// Determinant by cofactor expansion; the matrices here are at most a few rows.
fn det_n<T: Real>(m: &[Vec<Jet<T>>]) -> Jet<T> {
    match m.len() {
        0 => Jet::from_value(T::one()),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        n => {
            let mut acc = Jet::from_value(T::zero());
            for c in 0..n {
                let minor: Vec<Vec<Jet<T>>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, v)| v.clone()).collect()).collect();
                let term = m[0][c].mul(&det_n(&minor));
                acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

/// `Σ_I ω_I dx_I` over strictly increasing multi-indices `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialForm {
    dim: usize,
    degree: usize,
    terms: Vec<(Vec<usize>, ScalarField)>,
}

impl DifferentialForm {
    pub fn new(dim: usize, degree: usize, terms: Vec<(Vec<usize>, ScalarField)>) -> Result<Self> {
        if degree > dim {
            return Err(Error::Dimension(format!("no nonzero {degree}-forms on ℝ^{dim}")));
        }
        for (idx, _) in &terms {
            if idx.len() != degree {
                return Err(Error::Dimension(format!("multi-index {idx:?} does not have length {degree}")));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) || idx.iter().any(|&i| i >= dim) {
                return Err(Error::Dimension(format!("multi-index {idx:?} is not strictly increasing below {dim}")));
            }
        }
        Ok(DifferentialForm { dim, degree, terms })
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        DifferentialForm { dim, degree, terms: Vec::new() }
    }

    /// From `(multi-index, coefficient)` text pairs such as `("01", "x0")`.
    /// Indices are single digits, or comma-separated (`"3,11"`) when `dim > 10`.
    pub fn parse<A: AsRef<str>, B: AsRef<str>>(dim: usize, degree: usize, terms: &[(A, B)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(i, c)| Ok((parse_multi_index(i.as_ref())?, ScalarField::parse(c.as_ref(), dim)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, degree, parsed)
    }

    /// The 0-form `f`.
    pub fn function(dim: usize, f: ScalarField) -> Self {
        DifferentialForm { dim, degree: 0, terms: vec![(Vec::new(), f)] }
    }

    pub fn terms(&self) -> &[(Vec<usize>, ScalarField)] {
        &self.terms
    }

    /// The constant coefficient when this is a 0-form with a constant value.
    pub fn constant_function(&self) -> Option<Rational> {
        if self.degree != 0 {
            return None;
        }
        self.terms.iter().try_fold(Rational::from_integer(0), |acc, (_, f)| Some(acc + f.as_const()?))
    }

    pub fn scaled(&self, c: Rational) -> Self {
        let terms = self.terms.iter().map(|(i, f)| (i.clone(), ScalarField::Sum(vec![(c, f.clone())]))).collect();
        DifferentialForm { terms, ..self.clone() }
    }

    /// `f·ω`.
    pub fn times(&self, f: &ScalarField) -> Self {
        let terms = self.terms.iter().map(|(i, g)| (i.clone(), f.times(g))).collect();
        DifferentialForm { terms, ..self.clone() }
    }

    pub fn plus(&self, other: &DifferentialForm) -> Result<Self> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::Dimension("cannot add forms of different dimension or degree".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(DifferentialForm { terms, ..self.clone() })
    }

    /// Coordinate formula `(dω)_J = Σ_{j∈J} (−1)^{pos(j)} ∂ω_{J∖j}/∂x_j`.
    pub fn exterior_derivative(&self) -> DifferentialForm {
        let mut grouped: Vec<(Vec<usize>, Vec<(Rational, ScalarField)>)> = Vec::new();
        for (idx, f) in &self.terms {
            for j in 0..self.dim {
                if idx.contains(&j) {
                    continue;
                }
                let d = f.partial(j);
                if d.as_const() == Some(Rational::from_integer(0)) {
                    continue;
                }
                let pos = idx.iter().filter(|&&i| i < j).count();
                let mut out = idx.clone();
                out.insert(pos, j);
                let sign = Rational::from_integer(if pos % 2 == 0 { 1 } else { -1 });
                match grouped.iter_mut().find(|(k, _)| *k == out) {
                    Some((_, list)) => list.push((sign, d)),
                    None => grouped.push((out, vec![(sign, d)])),
                }
            }
        }
        grouped.sort_by(|a, b| a.0.cmp(&b.0));
        let terms = grouped
            .into_iter()
            .map(|(idx, mut list)| {
                let f = if list.len() == 1 && list[0].0 == Rational::from_integer(1) {
                    list.pop().map(|(_, f)| f).unwrap()
                } else {
                    ScalarField::Sum(list)
                };
                (idx, f)
            })
            .collect();
        DifferentialForm { dim: self.dim, degree: self.degree + 1, terms }
    }
}

fn parse_multi_index(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> =
        if text.contains(',') { text.split(',').map(str::trim).collect() } else { text.split("").filter(|s| !s.is_empty()).collect() };
    parts.iter().map(|p| p.parse::<usize>().map_err(|_| Error::Parse(format!("bad multi-index {text:?}")))).collect()
}

impl FormShape for DifferentialForm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn degree(&self) -> usize {
        self.degree
    }
}

impl<T: Real> FormField<T> for DifferentialForm {
    fn eval_n(&self, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        check_args(self, x, vs)?;
        let mut acc = Jet::from_value(T::zero());
        for (idx, f) in &self.terms {
            let minor: Vec<Vec<Jet<T>>> = idx.iter().map(|&r| vs.iter().map(|v| v[r].clone()).collect()).collect();
            let d = det_n(&minor);
            if d.coeffs().iter().all(|c| *c == T::zero()) {
                continue;
            }
            acc = acc.add(&f.eval_n(x)?.mul(&d));
        }
        Ok(acc)
    }
}

/// `(Φ*ω)(q)(u₁…u_k) = ω(Φ(q))(DΦ(q)u₁, …, DΦ(q)u_k)`.
#[derive(Clone, Debug)]
pub struct Pullback<F> {
    form: F,
    map: SmoothMap,
}

impl<F> Pullback<F> {
    pub fn new(form: F, map: SmoothMap) -> Result<Self>
    where
        F: FormShape,
    {
        if map.coarity() != form.dim() {
            return Err(Error::Dimension(format!("map into ℝ^{} cannot pull back a form on ℝ^{}", map.coarity(), form.dim())));
        }
        if form.degree() > map.arity() {
            return Err(Error::Dimension("form degree exceeds the source dimension".into()));
        }
        Ok(Pullback { form, map })
    }
}

pub fn pullback<F: FormShape>(form: F, map: SmoothMap) -> Result<Pullback<F>> {
    Pullback::new(form, map)
}

impl<F: FormShape> FormShape for Pullback<F> {
    fn dim(&self) -> usize {
        self.map.arity()
    }

    fn degree(&self) -> usize {
        self.form.degree()
    }
}

impl<T: Real, F: FormField<T>> FormField<T> for Pullback<F> {
    fn eval_n(&self, q: &[Jet<T>], us: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        check_args(self, q, us)?;
        let x = self.map.eval_n(q)?;
        let ws = us.iter().map(|u| self.map.directional_n(q, u)).collect::<Result<Vec<_>>>()?;
        self.form.eval_n(&x, &ws)
    }
}

/// `dF` computed from the invariant formula with constant vector fields,
/// `dF(v₀…v_k) = Σᵢ (−1)ⁱ D_{vᵢ}[F(v₀…v̂ᵢ…v_k)]`, where every bracket term
/// vanishes. Works for any form-like evaluator, including quadrature-defined ones.
#[derive(Clone, Debug)]
pub struct Exterior<F>(pub F);

impl<F: FormShape> FormShape for Exterior<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn degree(&self) -> usize {
        self.0.degree() + 1
    }
}

impl<T: Real, F: FormField<T>> FormField<T> for Exterior<F> {
    fn eval_n(&self, x: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        check_args(self, x, vs)?;
        let bit = vs.iter().map(|v| jet::next_bit(v)).fold(jet::next_bit(x), usize::max);
        let eps = Jet::epsilon(bit);
        let mut acc = Jet::from_value(T::zero());
        for (i, v) in vs.iter().enumerate() {
            let moved: Vec<Jet<T>> = x.iter().zip(v).map(|(xi, vi)| xi.add(&vi.mul(&eps))).collect();
            let others: Vec<Vec<Jet<T>>> = vs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, w)| w.clone()).collect();
            let d = self.0.eval_n(&moved, &others)?.eps_part(bit);
            acc = if i % 2 == 0 { acc.add(&d) } else { acc.sub(&d) };
        }
        Ok(acc)
    }
}

/// `τ(y)(v₁…v_{k−1}) = ∫₀¹ t^{k−1} ω(ty)(y, v₁…v_{k−1}) dt` on a star-shaped domain about 0.
#[derive(Clone, Debug)]
pub struct PoincarePrimitive<T, F> {
    form: F,
    domain: ChartDomain<T>,
}

impl<T: Real, F: FormField<T>> PoincarePrimitive<T, F> {
    /// `domain` must be a box or ball containing the origin (hence convex,
    /// hence star-shaped about 0).
    pub fn new(form: F, domain: ChartDomain<T>) -> Result<Self> {
        if form.degree() == 0 {
            return Err(Error::Precondition("the homotopy operator needs a form of degree at least 1".into()));
        }
        if domain.dim() != form.dim() {
            return Err(Error::Dimension("star-shaped domain has the wrong dimension".into()));
        }
        if matches!(domain, ChartDomain::Image { .. }) {
            return Err(Error::Precondition("star-shapedness is only known for box and ball domains".into()));
        }
        if !domain.contains(&vec![T::zero(); form.dim()], T::zero()) {
            return Err(Error::Precondition("domain does not contain the origin".into()));
        }
        Ok(PoincarePrimitive { form, domain })
    }
}

pub fn poincare_primitive<T: Real, F: FormField<T>>(form: F, domain: ChartDomain<T>) -> Result<PoincarePrimitive<T, F>> {
    PoincarePrimitive::new(form, domain)
}

impl<T, F: FormShape> FormShape for PoincarePrimitive<T, F> {
    fn dim(&self) -> usize {
        self.form.dim()
    }

    fn degree(&self) -> usize {
        self.form.degree() - 1
    }
}

impl<T: Real, F: FormField<T>> FormField<T> for PoincarePrimitive<T, F> {
    fn eval_n(&self, y: &[Jet<T>], vs: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
        check_args(self, y, vs)?;
        let plain = jet::values(y);
        if !self.domain.contains(&plain, T::zero()) {
            return Err(Error::Domain(format!("{plain:?} is outside the star-shaped domain")));
        }
        let k = self.form.degree();
        let mut args = Vec::with_capacity(k);
        args.push(y.to_vec());
        args.extend(vs.iter().cloned());
        let integrand = |t: T| -> Result<Jet<T>> {
            let ty: Vec<Jet<T>> = y.iter().map(|c| c.scale(t)).collect();
            Ok(self.form.eval_n(&ty, &args)?.scale(t.powi(k as i32 - 1)))
        };
        adaptive_gauss(&integrand, T::zero(), T::one(), tol(1e-12))
    }
}

/// A vector field `ℝᴺ → ℝᴺ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    dim: usize,
    kind: FieldKind,
}

#[derive(Clone, Debug, PartialEq)]
enum FieldKind {
    Map(SmoothMap),
    Bracket(Box<VectorField>, Box<VectorField>),
}

impl VectorField {
    pub fn new(map: SmoothMap) -> Result<Self> {
        if map.arity() != map.coarity() {
            return Err(Error::Dimension("a vector field must map ℝᴺ to ℝᴺ".into()));
        }
        Ok(VectorField { dim: map.arity(), kind: FieldKind::Map(map) })
    }

    pub fn parse<S: AsRef<str>>(dim: usize, components: &[S]) -> Result<Self> {
        Self::new(SmoothMap::parse(dim, components)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_n<T: Real>(&self, x: &[Jet<T>]) -> Result<Vec<Jet<T>>> {
        match &self.kind {
            FieldKind::Map(m) => m.eval_n(x),
            FieldKind::Bracket(a, b) => {
                // In a flat chart the splicing projection is the identity, so the
                // correction terms involving its derivatives drop out and only
                // DA·B − DB·A remains.
                let bx = b.eval_n(x)?;
                let ax = a.eval_n(x)?;
                let (_, da_b) = jet::directional(x, &bx, |y| a.eval_n(y))?;
                let (_, db_a) = jet::directional(x, &ax, |y| b.eval_n(y))?;
                Ok(da_b.iter().zip(&db_a).map(|(p, q)| p.sub(q)).collect())
            }
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!("vector field on ℝ^{} evaluated on ℝ^{}", self.dim, x.len())));
        }
        Ok(jet::values(&self.eval_n(&jet::lift(x))?))
    }
}

/// `[A, B](x) = DA(x)·B(x) − DB(x)·A(x)`.
pub fn lie_bracket(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    if a.dim != b.dim {
        return Err(Error::Dimension("bracket of fields on different spaces".into()));
    }
    Ok(VectorField { dim: a.dim, kind: FieldKind::Bracket(Box::new(a.clone()), Box::new(b.clone())) })
}

/// `k` vectors in `[−1, 1]ᴺ` per sample point.
pub(crate) fn sample_vectors<T: Real>(dim: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<Vec<T>>> {
    let per: Vec<Vec<Vec<T>>> = (0..k).map(|i| halton::<T>(dim, count, seed.wrapping_add(7919 * (i as u64 + 1)))).collect();
    (0..count).map(|s| per.iter().map(|vs| vs[s].iter().map(|&c| T::lit(2.0) * c - T::one()).collect()).collect()).collect()
}

fn pushforward_defect<T: Real, F: FormField<T>>(form: &F, map: &SmoothMap, x: &[T], vs: &[Vec<T>]) -> Result<T> {
    let y = map.eval(x)?;
    let ws = vs.iter().map(|v| map.directional(x, v)).collect::<Result<Vec<_>>>()?;
    Ok((form.eval(&y, &ws)? - form.eval(x, vs)?).abs())
}

/// Largest `|ω(φx)(Dφ v…) − ω(x)(v…)|` over the given points and random vectors.
pub fn form_relatedness<T: Real, F: FormField<T>>(form: &F, map: &SmoothMap, points: &[Vec<T>], seed: u64, tolerance: T) -> Result<Report> {
    if map.arity() != form.dim() || map.coarity() != form.dim() {
        return Err(Error::Dimension("map does not act on the form's space".into()));
    }
    let mut report = Report::new("form_relatedness", tolerance.as_f64());
    let vectors = sample_vectors::<T>(form.dim(), form.degree(), points.len(), seed);
    let mut worst = T::zero();
    let mut at: Option<Vec<T>> = None;
    for (x, vs) in points.iter().zip(&vectors) {
        let d = pushforward_defect(form, map, x, vs)?;
        if d > worst || at.is_none() {
            worst = worst.max(d);
            at = Some(x.clone());
        }
    }
    report.value("max_defect", worst);
    if worst > tolerance {
        report.fail();
        if let Some(x) = at {
            report.witness("point", &x, worst);
        }
    }
    Ok(report)
}

/// `max_{g, x, v} |ω(φ_g x)(Dφ_g v…) − ω(x)(v…)|` over the chart's sample points.
pub fn check_form_invariance<T: Real, F: FormField<T>>(form: &F, chart: &Chart<T>, tolerance: T) -> Result<Report> {
    if chart.dim() != form.dim() {
        return Err(Error::Dimension("form and chart live on different spaces".into()));
    }
    let points = chart.samples(GROUP_SAMPLES);
    let vectors = sample_vectors::<T>(form.dim(), form.degree(), points.len(), chart.seed());
    let mut report = Report::new("check_form_invariance", tolerance.as_f64());
    let mut worst = T::zero();
    let mut witness: Option<(usize, Vec<T>)> = None;
    for g in 0..chart.order() {
        for (x, vs) in points.iter().zip(&vectors) {
            let d = pushforward_defect(form, chart.element(g), x, vs)?;
            if d > worst {
                worst = d;
                witness = Some((g, x.clone()));
            }
        }
    }
    report.value("max_defect", worst);
    if worst > tolerance {
        report.fail();
        if let Some((g, x)) = witness {
            report.witness(format!("element {}", chart.group().names[g]), &x, worst);
        }
    }
    Ok(report)
}

/// Checks `Dφ(x)[A,B](x) = [A,B](φ(x))` after verifying that `A` and `B` are
/// `φ`-related. Unrelated inputs produce a failing report with a witness
/// and no naturality value.
pub fn bracket_naturality_check<T: Real>(
    phi: &SmoothMap,
    a: &VectorField,
    b: &VectorField,
    points: &[Vec<T>],
    tolerance: T,
) -> Result<Report> {
    if phi.arity() != a.dim() || phi.coarity() != a.dim() || a.dim() != b.dim() {
        return Err(Error::Dimension("map and fields live on different spaces".into()));
    }
    let mut report = Report::new("bracket_naturality_check", tolerance.as_f64());
    let related = |f: &VectorField, x: &[T]| -> Result<T> {
        let lhs = phi.directional(x, &f.eval(x)?)?;
        let rhs = f.eval(&phi.eval(x)?)?;
        Ok(scalar::max_abs_diff(&lhs, &rhs))
    };
    let mut worst_rel = T::zero();
    let mut rel_at: Option<Vec<T>> = None;
    for x in points {
        let d = related(a, x)?.max(related(b, x)?);
        if d > worst_rel {
            worst_rel = d;
            rel_at = Some(x.clone());
        }
    }
    report.value("relatedness_defect", worst_rel);
    if worst_rel > tolerance {
        report.fail();
        if let Some(x) = rel_at {
            report.witness("fields are not related by the map", &x, worst_rel);
        }
        return Ok(report);
    }
    let bracket = lie_bracket(a, b)?;
    let mut worst = T::zero();
    let mut at: Option<Vec<T>> = None;
    for x in points {
        let lhs = phi.directional(x, &bracket.eval(x)?)?;
        let rhs = bracket.eval(&phi.eval(x)?)?;
        let d = scalar::max_abs_diff(&lhs, &rhs);
        if d > worst {
            worst = d;
            at = Some(x.clone());
        }
    }
    report.value("naturality_defect", worst);
    if worst > tolerance {
        report.fail();
        if let Some(x) = at {
            report.witness("naturality", &x, worst);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GroupAction;
    use approx::assert_abs_diff_eq;

    fn form(dim: usize, degree: usize, terms: &[(&str, &str)]) -> DifferentialForm {
        DifferentialForm::parse(dim, degree, terms).unwrap()
    }

    fn e(dim: usize, i: usize) -> Vec<f64> {
        (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn alternation_and_readoff() {
        let area = form(2, 2, &[("01", "1")]);
        assert_eq!(area.eval(&[0.3, 0.4], &[e(2, 0), e(2, 1)]).unwrap(), 1.0);
        assert_eq!(area.eval(&[0.3, 0.4], &[e(2, 1), e(2, 0)]).unwrap(), -1.0);
        let v = vec![0.7, -0.2];
        assert_eq!(area.eval(&[0.0, 0.0], &[v.clone(), v]).unwrap(), 0.0);
        let w = form(2, 1, &[("1", "x0")]);
        assert_eq!(w.eval(&[3.0, 0.0], &[e(2, 1)]).unwrap(), 3.0);
        assert!(w.eval(&[3.0, 0.0], &[e(2, 1), e(2, 0)]).is_err());
        assert!(w.eval(&[3.0], &[e(2, 1)]).is_err());
    }

    #[test]
    fn multi_index_validation() {
        assert!(DifferentialForm::parse(2, 2, &[("10", "1")]).is_err());
        assert!(DifferentialForm::parse(2, 1, &[("2", "1")]).is_err());
        assert!(DifferentialForm::parse(2, 1, &[("01", "1")]).is_err());
        let big = DifferentialForm::parse(12, 2, &[("3,11", "1")]).unwrap();
        assert_eq!(big.terms()[0].0, vec![3, 11]);
    }

    #[test]
    fn circle_pullback_of_angle_form() {
        let w = form(2, 1, &[("0", "-x1"), ("1", "x0")]);
        let phi = SmoothMap::parse(1, &["cos(x0)", "sin(x0)"]).unwrap();
        let p = pullback(&w, phi).unwrap();
        for k in 0..16 {
            let t = k as f64 * 0.41 - 3.0;
            assert_abs_diff_eq!(p.eval(&[t], &[vec![1.0]]).unwrap(), 1.0, epsilon = 1e-14);
        }
        let constant = SmoothMap::parse(1, &["2", "5"]).unwrap();
        assert_eq!(pullback(&w, constant).unwrap().eval(&[0.3], &[vec![1.0]]).unwrap(), 0.0);
    }

    #[test]
    fn identity_pullback_and_functoriality() {
        let w = form(3, 2, &[("01", "x2*x0"), ("12", "sin(x1)"), ("02", "exp(x0 - x2)")]);
        let id = pullback(&w, SmoothMap::identity(3)).unwrap();
        let psi = SmoothMap::parse(3, &["x0 + x1^2", "x1 - x2/3", "x2 + x0*x1"]).unwrap();
        let phi = SmoothMap::parse(2, &["x0*x1", "x0 - x1", "x1^3"]).unwrap();
        let composite = pullback(&w, psi.compose(&phi).unwrap()).unwrap();
        let outer = pullback(&w, psi).unwrap();
        let nested = pullback(&outer, phi).unwrap();
        for (x, vs) in halton::<f64>(3, 10, 3).iter().zip(sample_vectors::<f64>(3, 2, 10, 3)) {
            assert_abs_diff_eq!(id.eval(x, &vs).unwrap(), w.eval(x, &vs).unwrap(), epsilon = 1e-14);
            let q = &x[..2];
            let us: Vec<Vec<f64>> = vs.iter().map(|v| v[..2].to_vec()).collect();
            assert_abs_diff_eq!(composite.eval(q, &us).unwrap(), nested.eval(q, &us).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn exterior_derivative_examples() {
        let w = form(2, 1, &[("1", "x0")]);
        let dw = w.exterior_derivative();
        assert_eq!(dw.eval(&[0.4, 0.9], &[e(2, 0), e(2, 1)]).unwrap(), 1.0);
        // f dg with f = x0 x1, g = sin(x0) + x1^2: dω = df ∧ dg
        let w = form(2, 1, &[("0", "x0*x1*cos(x0)"), ("1", "x0*x1*2*x1")]);
        let dw = w.exterior_derivative();
        for x in halton::<f64>(2, 20, 0) {
            let (df0, df1) = (x[1], x[0]);
            let (dg0, dg1) = (x[0].cos(), 2.0 * x[1]);
            let want = df0 * dg1 - df1 * dg0;
            assert_abs_diff_eq!(dw.eval(&x, &[e(2, 0), e(2, 1)]).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn d_squared_vanishes_and_matches_invariant_formula() {
        let w = form(3, 1, &[("0", "x1^2*x2"), ("1", "sin(x0*x2)"), ("2", "exp(x0)*x1")]);
        let dw = w.exterior_derivative();
        let ddw = dw.exterior_derivative();
        let invariant = Exterior(&w);
        let pts = halton::<f64>(3, 20, 11);
        let vecs3 = sample_vectors::<f64>(3, 3, 20, 11);
        for (x, vs) in pts.iter().zip(&vecs3) {
            assert!(ddw.eval(x, vs).unwrap().abs() <= 1e-10);
            assert!(Exterior(&dw).eval(x, vs).unwrap().abs() <= 1e-10);
            let two = &vs[..2];
            assert_abs_diff_eq!(dw.eval(x, two).unwrap(), invariant.eval(x, two).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_bracket_is_commutator() {
        let m = [[1.0, 2.0], [0.5, -1.0]];
        let k = [[0.0, -1.0], [3.0, 0.25]];
        let a = VectorField::parse(2, &["x0 + 2*x1", "1/2*x0 - x1"]).unwrap();
        let b = VectorField::parse(2, &["-x1", "3*x0 + 1/4*x1"]).unwrap();
        let ab = lie_bracket(&a, &b).unwrap();
        let ba = lie_bracket(&b, &a).unwrap();
        for x in halton::<f64>(2, 10, 5) {
            let mut want = [0.0; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let c = (0..2).map(|l| m[i][l] * k[l][j] - k[i][l] * m[l][j]).sum::<f64>();
                    want[i] += c * x[j];
                }
            }
            let got = ab.eval(&x).unwrap();
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-12);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-12);
            let rev = ba.eval(&x).unwrap();
            assert_eq!(rev, got.iter().map(|v| -v).collect::<Vec<_>>());
        }
        let c1 = VectorField::parse(2, &["1", "2"]).unwrap();
        let c2 = VectorField::parse(2, &["-3", "1/2"]).unwrap();
        assert_eq!(lie_bracket(&c1, &c2).unwrap().eval(&[0.3, 0.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn jacobi_identity() {
        let a = VectorField::parse(2, &["sin(x1)", "x0^2"]).unwrap();
        let b = VectorField::parse(2, &["x0*x1", "exp(x0)"]).unwrap();
        let c = VectorField::parse(2, &["x1^3 - x0", "cos(x0 + x1)"]).unwrap();
        let br = |p: &VectorField, q: &VectorField| lie_bracket(p, q).unwrap();
        let terms = [br(&a, &br(&b, &c)), br(&b, &br(&c, &a)), br(&c, &br(&a, &b))];
        for x in halton::<f64>(2, 10, 2) {
            let s: Vec<f64> = (0..2).map(|i| terms.iter().map(|t| t.eval(&x).unwrap()[i]).sum()).collect();
            assert!(s.iter().all(|v| v.abs() <= 1e-8), "{s:?}");
        }
    }

    #[test]
    fn naturality_and_unrelated_inputs() {
        // rotation by π/2 commutes with rotation-equivariant linear fields
        let phi = SmoothMap::parse(2, &["-x1", "x0"]).unwrap();
        let a = VectorField::parse(2, &["2*x0 - x1", "x0 + 2*x1"]).unwrap();
        let b = VectorField::parse(2, &["-x1", "x0"]).unwrap();
        let pts = halton::<f64>(2, 16, 0);
        let r = bracket_naturality_check(&phi, &a, &b, &pts, 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        let id = SmoothMap::identity(2);
        let c = VectorField::parse(2, &["x1^2", "sin(x0)"]).unwrap();
        let r = bracket_naturality_check(&id, &a, &c, &pts, 1e-9).unwrap();
        assert_eq!(r.get("naturality_defect"), Some(0.0));
        let r = bracket_naturality_check(&phi, &a, &c, &pts, 1e-9).unwrap();
        assert!(!r.pass);
        assert!(r.get("naturality_defect").is_none());
        assert_eq!(r.witnesses.len(), 1);
    }

    #[test]
    fn poincare_cases() {
        let ball = ChartDomain::Ball { center: vec![0.0, 0.0], radius: 2.0 };
        let dx = form(2, 1, &[("0", "1")]);
        let tau = poincare_primitive(&dx, ball.clone()).unwrap();
        assert_abs_diff_eq!(tau.eval(&[0.7, -0.3], &[]).unwrap(), 0.7, epsilon = 1e-14);
        let area = form(2, 2, &[("01", "1")]);
        let tau = poincare_primitive(&area, ball.clone()).unwrap();
        let y = [0.5, 0.25];
        let v = vec![-0.3, 0.8];
        let want = 0.5 * area.eval(&y, &[y.to_vec(), v.clone()]).unwrap();
        assert_abs_diff_eq!(tau.eval(&y, &[v]).unwrap(), want, epsilon = 1e-14);
        let closed = form(2, 1, &[("0", "x0"), ("1", "x1")]);
        let tau = poincare_primitive(&closed, ball.clone()).unwrap();
        let d_tau = Exterior(&tau);
        for x in halton::<f64>(2, 20, 0) {
            let x: Vec<f64> = x.iter().map(|c| c - 0.5).collect();
            let v = [vec![0.3, -1.0]];
            assert_abs_diff_eq!(d_tau.eval(&x, &v).unwrap(), closed.eval(&x, &v).unwrap(), epsilon = 1e-12);
        }
        assert!(matches!(tau.eval(&[3.0, 0.0], &[]), Err(Error::Domain(_))));
        let off = ChartDomain::Ball { center: vec![5.0, 0.0], radius: 1.0 };
        assert!(poincare_primitive(&closed, off).is_err());
    }

    #[test]
    fn form_invariance_checks() {
        let s = "sqrt(3)/2";
        let rot = GroupAction {
            elements: vec![
                SmoothMap::identity(2),
                SmoothMap::parse(2, &[format!("-x0/2 - {s}*x1"), format!("{s}*x0 - x1/2")]).unwrap(),
                SmoothMap::parse(2, &[format!("-x0/2 + {s}*x1"), format!("-{s}*x0 - x1/2")]).unwrap(),
            ],
            table: (0..3).map(|a| (0..3).map(|b| (a + b) % 3).collect()).collect(),
            identity: 0,
            names: vec!["e".into(), "r".into(), "r2".into()],
        };
        let domain = ChartDomain::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let chart = Chart::new(domain.clone(), rot).unwrap();
        let area = form(2, 2, &[("01", "1")]);
        assert!(check_form_invariance(&area, &chart, 1e-10).unwrap().pass);
        let refl = GroupAction {
            elements: vec![SmoothMap::identity(2), SmoothMap::parse(2, &["-x0", "x1"]).unwrap()],
            table: vec![vec![0, 1], vec![1, 0]],
            identity: 0,
            names: vec!["e".into(), "r".into()],
        };
        let chart = Chart::new(domain.clone(), refl).unwrap();
        let w = form(2, 1, &[("1", "x0")]);
        let r = check_form_invariance(&w, &chart, 1e-10).unwrap();
        assert!(!r.pass);
        let wit = &r.witnesses[0];
        assert!(wit.value > 0.0);
        let trivial = Chart::trivial(domain).unwrap();
        assert_eq!(check_form_invariance(&w, &trivial, 0.0).unwrap().get("max_defect"), Some(0.0));
    }
}
