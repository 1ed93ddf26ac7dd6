use std::sync::Arc;

use serde::Serialize;

use super::chart::Chart;
use super::domain::ParamDomain;
use super::tol;
use crate::error::{Error, Result};
use crate::expr::SmoothMap;
use crate::jet::{Jet, Number};
use crate::linalg;
use crate::report::Report;
use crate::scalar::{self, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Orientation::Positive),
            -1 => Ok(Orientation::Negative),
            _ => Err(Error::Branch(format!("orientation must be ±1, got {s}"))),
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Orientation::Positive => 1,
            Orientation::Negative => -1,
        }
    }

    pub fn factor<T: Real>(self) -> T {
        match self {
            Orientation::Positive => T::one(),
            Orientation::Negative => -T::one(),
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn times(self, other: Orientation) -> Self {
        if self == other {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }
}

/// How a branch's parameter domain is mapped into the chart.
#[derive(Clone, Debug, PartialEq)]
pub enum Parametrization<T> {
    Map(SmoothMap),
    /// `q ↦ frame·q + correction(q)` with `frame` given as `N` rows of `n` entries.
    Graph {
        frame: Vec<Vec<T>>,
        correction: SmoothMap,
    },
    /// Piecewise-linear curve through `points`; parameter `s ∈ [0, segments]`.
    Polyline {
        points: Vec<Vec<T>>,
        closed: bool,
    },
    /// Restriction of `parent` to the face where coordinate `axis` is 0.
    Face {
        parent: Arc<Parametrization<T>>,
        axis: usize,
    },
    /// `map ∘ inner`.
    Pushforward {
        map: SmoothMap,
        inner: Arc<Parametrization<T>>,
    },
}

impl<T: Real> Parametrization<T> {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Parametrization::Map(m) => m.coarity(),
            Parametrization::Graph { frame, .. } => frame.len(),
            Parametrization::Polyline { points, .. } => points.first().map_or(0, Vec::len),
            Parametrization::Face { parent, .. } => parent.ambient_dim(),
            Parametrization::Pushforward { map, .. } => map.coarity(),
        }
    }

    pub fn segments(&self) -> usize {
        match self {
            Parametrization::Polyline { points, closed } => {
                if *closed {
                    points.len()
                } else {
                    points.len().saturating_sub(1)
                }
            }
            _ => 0,
        }
    }

    pub fn eval<N: Number<T>>(&self, q: &[N]) -> Result<Vec<N>> {
        match self {
            Parametrization::Map(m) => m.eval_n(q),
            Parametrization::Graph { frame, correction } => {
                let corr = correction.eval_n(q)?;
                Ok(frame.iter().zip(corr).map(|(row, c)| row.iter().zip(q).fold(c, |acc, (&f, qi)| acc.add(&qi.scale(f)))).collect())
            }
            Parametrization::Polyline { points, closed } => {
                let segs = self.segments();
                let s = &q[0];
                let sv = s.value();
                let mut k = sv.floor().to_isize().unwrap_or(0);
                let mut shift = T::zero();
                if *closed {
                    let m = segs as isize;
                    let wraps = k.div_euclid(m);
                    shift = T::lit((wraps * m) as f64);
                    k = k.rem_euclid(m);
                } else {
                    k = k.clamp(0, segs as isize - 1);
                }
                let i = k as usize;
                let a = &points[i];
                let b = &points[(i + 1) % points.len()];
                let local = s.sub(&N::constant(shift + T::of_usize(i)));
                Ok(a.iter().zip(b).map(|(&pa, &pb)| local.scale(pb - pa).add(&N::constant(pa))).collect())
            }
            Parametrization::Face { parent, axis } => {
                let mut full = q.to_vec();
                full.insert(*axis, N::constant(T::zero()));
                parent.eval(&full)
            }
            Parametrization::Pushforward { map, inner } => map.eval_n(&inner.eval(q)?),
        }
    }

    /// `Φ(q)` and the columns `∂ⱼΦ(q)`.
    pub fn tangents(&self, q: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let point = self.eval(q)?;
        let mut cols = Vec::with_capacity(q.len());
        for j in 0..q.len() {
            let seeded: Vec<Jet<T>> =
                q.iter().enumerate().map(|(i, &v)| if i == j { Jet::seeded(v, 0, T::one()) } else { Jet::from_value(v) }).collect();
            cols.push(self.eval(&seeded)?.iter().map(|y| y.coeff(1)).collect());
        }
        Ok((point, cols))
    }
}

/// Result of projecting an ambient point onto a branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    pub param: Vec<T>,
    pub point: Vec<T>,
    pub distance: T,
}

/// An oriented parametrized `n`-manifold with corners inside a chart.
#[derive(Clone, Debug)]
pub struct Branch<T> {
    domain: ParamDomain<T>,
    param: Arc<Parametrization<T>>,
    orientation: Orientation,
    resolution: usize,
    vertices: Arc<Vec<(Vec<T>, Vec<T>)>>,
}

/// A boundary face `{q_axis = 0}` of a branch with its induced orientation.
#[derive(Clone, Debug)]
pub struct BoundaryFace<T> {
    pub axis: usize,
    pub branch: Branch<T>,
}

impl<T: Real> Branch<T> {
    /// Builds a branch and checks immersion and injectivity at the cell centres of its mesh.
    pub fn new(domain: ParamDomain<T>, param: Parametrization<T>, orientation: Orientation, resolution: usize) -> Result<Self> {
        if let Parametrization::Map(m) = &param {
            if m.arity() != domain.dim() {
                return Err(Error::Dimension(format!(
                    "parametrization takes {} parameters but the domain has dimension {}",
                    m.arity(),
                    domain.dim()
                )));
            }
        }
        if let Parametrization::Graph { frame, correction } = &param {
            if frame.iter().any(|r| r.len() != domain.dim()) || correction.arity() != domain.dim() || correction.coarity() != frame.len() {
                return Err(Error::Dimension("graph frame or correction does not match the domain".into()));
            }
        }
        let n = domain.dim();
        let branch = Self::unchecked(domain, Arc::new(param), orientation, resolution)?;
        if n > branch.ambient_dim() {
            return Err(Error::Branch("branch dimension exceeds ambient dimension".into()));
        }
        let centers: Vec<Vec<T>> = branch.domain.mesh(resolution)?.cells.iter().map(|c| c.center()).collect();
        let mut images = Vec::with_capacity(centers.len());
        let rank_tol: T = tol(1e-9);
        for q in &centers {
            let (p, cols) = branch.param.tangents(q)?;
            let scale = cols.iter().map(|c| scalar::norm(c)).fold(T::zero(), T::max).max(T::one());
            if linalg::orthonormalize(&cols, rank_tol * scale).len() < n {
                return Err(Error::Branch(format!("parametrization is not an immersion at {q:?}")));
            }
            images.push(p);
        }
        // injectivity on sample images: sort along the first coordinate and sweep
        let eps: T = tol(1e-9);
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.sort_by(|&a, &b| images[a][0].partial_cmp(&images[b][0]).unwrap_or(std::cmp::Ordering::Equal));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if images[j][0] - images[i][0] > eps {
                    break;
                }
                if scalar::dist(&images[i], &images[j]) <= eps {
                    return Err(Error::Branch(format!(
                        "parametrization is not injective: {:?} and {:?} share an image",
                        centers[i], centers[j]
                    )));
                }
            }
        }
        Ok(branch)
    }

    pub(crate) fn unchecked(
        domain: ParamDomain<T>,
        param: Arc<Parametrization<T>>,
        orientation: Orientation,
        resolution: usize,
    ) -> Result<Self> {
        let resolution = resolution.max(1);
        let vertices = domain
            .vertices(resolution)?
            .into_iter()
            .map(|q| {
                let p = param.eval(&q)?;
                Ok((q, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Branch { domain, param, orientation, resolution, vertices: Arc::new(vertices) })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.param.ambient_dim()
    }

    pub fn domain(&self) -> &ParamDomain<T> {
        &self.domain
    }

    pub fn parametrization(&self) -> &Arc<Parametrization<T>> {
        &self.param
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Self {
        Branch { orientation, ..self.clone() }
    }

    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        Self::unchecked(self.domain.clone(), self.param.clone(), self.orientation, resolution)
    }

    /// Mesh vertices as `(parameter, image)` pairs.
    pub fn vertices(&self) -> &[(Vec<T>, Vec<T>)] {
        &self.vertices
    }

    pub fn eval(&self, q: &[T]) -> Result<Vec<T>> {
        self.param.eval(q)
    }

    /// `φ ∘ Φ` as a new branch on the same domain (validated).
    pub fn pushforward(&self, map: &SmoothMap) -> Result<Self> {
        if map.arity() != self.ambient_dim() {
            return Err(Error::Dimension("pushforward map does not act on the ambient space".into()));
        }
        let param = Parametrization::Pushforward { map: map.clone(), inner: self.param.clone() };
        Self::new(self.domain.clone(), param, self.orientation, self.resolution)
    }

    /// One face per quadrant axis, oriented outward-normal-first: the face
    /// frame `(v₁…v_{n−1})` is positive when `(−e_axis, v₁…v_{n−1})` is
    /// positive for the branch, giving sign `orientation·(−1)^{axis+1}`.
    /// Corner overlaps are not deduplicated.
    pub fn boundary_faces(&self) -> Result<Vec<BoundaryFace<T>>> {
        self.domain
            .quadrant_axes()
            .into_iter()
            .map(|axis| {
                let sign = if axis % 2 == 0 { self.orientation.reversed() } else { self.orientation };
                let param = Arc::new(Parametrization::Face { parent: self.param.clone(), axis });
                let branch = Self::unchecked(self.domain.face(axis), param, sign, self.resolution)?;
                Ok(BoundaryFace { axis, branch })
            })
            .collect()
    }

    /// Closest point of the branch to `x`: Gauss–Newton from the three
    /// nearest mesh vertices, clamped to the parameter domain.
    pub fn project(&self, x: &[T]) -> Result<Projection<T>> {
        if x.len() != self.ambient_dim() {
            return Err(Error::Dimension("projection point has the wrong dimension".into()));
        }
        let mut nearest: Vec<(T, usize)> = self.vertices.iter().enumerate().map(|(i, (_, p))| (scalar::dist(p, x), i)).collect();
        nearest.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut best: Option<Projection<T>> = None;
        for &(_, i) in nearest.iter().take(3) {
            let candidate = self.refine_projection(x, self.vertices[i].0.clone())?;
            if best.as_ref().is_none_or(|b| candidate.distance < b.distance) {
                best = Some(candidate);
            }
        }
        best.ok_or_else(|| Error::Branch("branch has no vertices".into()))
    }

    fn refine_projection(&self, x: &[T], mut q: Vec<T>) -> Result<Projection<T>> {
        let mut point = self.param.eval(&q)?;
        let mut d = scalar::dist(&point, x);
        if self.dim() == 0 {
            return Ok(Projection { param: q, point, distance: d });
        }
        for _ in 0..60 {
            let (_, cols) = self.param.tangents(&q)?;
            let r: Vec<T> = point.iter().zip(x).map(|(&a, &b)| a - b).collect();
            let grad: Vec<T> = cols.iter().map(|c| linalg::dot(c, &r)).collect();
            // Newton on ½|Φ(q) − x|²; Gauss–Newton alone stalls when the residual is
            // comparable to the curvature radius
            let mut hess = linalg::gram(&cols);
            for i in 0..q.len() {
                for j in i..q.len() {
                    let second = self.second_partial(&q, i, j)?;
                    let c = linalg::dot(&second, &r);
                    hess[i][j] += c;
                    if i != j {
                        hess[j][i] += c;
                    }
                }
            }
            let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
            let newton = linalg::solve(&hess, &neg).filter(|s| linalg::dot(s, &grad) < T::zero());
            let Some(step) = newton.or_else(|| linalg::solve(&linalg::gram(&cols), &neg)) else { break };
            let mut scale = T::one();
            let mut improved = false;
            for _ in 0..30 {
                let mut trial: Vec<T> = q.iter().zip(&step).map(|(&a, &s)| a + scale * s).collect();
                self.domain.normalize(&mut trial);
                let p = self.param.eval(&trial)?;
                let dt = scalar::dist(&p, x);
                // allow rounding-level increases so the parameter keeps converging
                // after the distance has stalled
                if dt <= d + T::lit(8.0) * T::epsilon() * (T::one() + d) {
                    let moved = scalar::dist(&trial, &q);
                    q = trial;
                    point = p;
                    d = dt;
                    improved = moved > T::lit(4.0) * T::epsilon() * (T::one() + scalar::norm(&q));
                    break;
                }
                scale *= T::lit(0.5);
            }
            if !improved {
                break;
            }
        }
        Ok(Projection { param: q, point, distance: d })
    }

    fn second_partial(&self, q: &[T], i: usize, j: usize) -> Result<Vec<T>> {
        let seeded: Vec<Jet<T>> = q
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let a = if k == i { T::one() } else { T::zero() };
                let b = if k == j { T::one() } else { T::zero() };
                Jet::seeded(v, 0, a).add(&Jet::seeded(T::zero(), 1, b))
            })
            .collect();
        Ok(self.param.eval(&seeded)?.iter().map(|y| y.coeff(3)).collect())
    }
}

/// Builds the branch `q ↦ frame·q + A(q)` from a good parametrization in graph
/// form. Requires `A(0) = 0` and `DA(0) = 0` to within 1e-9.
pub fn branch_from_graph<T: Real>(
    frame: Vec<Vec<T>>,
    correction: SmoothMap,
    domain: ParamDomain<T>,
    orientation: Orientation,
    resolution: usize,
) -> Result<Branch<T>> {
    let n = domain.dim();
    let origin = vec![T::zero(); n];
    let eps: T = tol(1e-9);
    if correction.arity() != n {
        return Err(Error::Dimension("graph correction must take the domain coordinates".into()));
    }
    if correction.eval(&origin)?.iter().any(|v| v.abs() > eps) {
        return Err(Error::Precondition("graph correction does not vanish at the origin".into()));
    }
    if correction.jacobian(&origin)?.iter().flatten().any(|v| v.abs() > eps) {
        return Err(Error::Precondition("graph correction has nonzero derivative at the origin".into()));
    }
    Branch::new(domain, Parametrization::Graph { frame, correction }, orientation, resolution)
}

/// For every group element and every mesh vertex `x` of every branch, the
/// distance from `φ_g(x)` to the union of the branches; passes when the
/// largest such distance is at most `tolerance`.
pub fn check_group_invariance<T: Real>(chart: &Chart<T>, branches: &[Branch<T>], tolerance: T) -> Result<Report> {
    let mut report = Report::new("check_group_invariance", tolerance.as_f64());
    let mut worst = T::zero();
    let mut witness: Option<(usize, Vec<T>)> = None;
    for g in 0..chart.order() {
        if g == chart.group().identity {
            continue;
        }
        for b in branches {
            for (_, x) in b.vertices() {
                let y = chart.act(g, x)?;
                let mut d = T::infinity();
                for other in branches {
                    d = d.min(other.project(&y)?.distance);
                }
                if d > worst {
                    worst = d;
                    witness = Some((g, x.clone()));
                }
            }
        }
    }
    report.value("max_violation", worst);
    if worst > tolerance {
        report.fail();
    }
    if let Some((g, x)) = witness {
        report.witness(format!("element {g}"), &x, worst);
    }
    Ok(report)
}
