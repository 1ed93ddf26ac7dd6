use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::scalar::Real;

/// Tolerance for deciding that a quadrant coordinate sits on its boundary.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// One factor of a product parameter domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor<T> {
    /// `[0, extent]`; only the end at 0 is boundary. `extent` may be infinite
    /// for point queries but must be finite to mesh.
    Quadrant { extent: T },
    /// `[lo, hi]` in an `ℝ` factor; both ends are chart cutoffs, not boundary.
    Interval { lo: T, hi: T },
    /// `ℝ / period·ℤ`, meshed over `[start, start + period)`.
    Periodic { start: T, period: T },
}

impl<T: Real> Factor<T> {
    pub fn bounds(&self) -> (T, T) {
        match *self {
            Factor::Quadrant { extent } => (T::zero(), extent),
            Factor::Interval { lo, hi } => (lo, hi),
            Factor::Periodic { start, period } => (start, start + period),
        }
    }

    pub fn is_quadrant(&self) -> bool {
        matches!(self, Factor::Quadrant { .. })
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Factor::Periodic { .. })
    }
}

/// A product `Q = [0,b₁]×…×[0,b_d] × (intervals or circles)` in any axis order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamDomain<T> {
    factors: Vec<Factor<T>>,
}

/// A tensor-product cell `Π [loᵢ, hiᵢ]` with its multi-index.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell<T> {
    pub index: Vec<usize>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> Cell<T> {
    pub fn volume(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |v, (&a, &b)| v * (b - a))
    }

    pub fn center(&self) -> Vec<T> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| (a + b) * T::lit(0.5)).collect()
    }

    /// Tensor-product Gauss nodes with weights scaled to the cell volume.
    /// A zero-dimensional cell has the single node `()` with weight 1.
    pub fn nodes(&self, rule: &GaussRule<T>) -> Vec<(Vec<T>, T)> {
        let mut out: Vec<(Vec<T>, T)> = vec![(Vec::with_capacity(self.lo.len()), T::one())];
        for (&a, &b) in self.lo.iter().zip(&self.hi) {
            let h = b - a;
            let mut next = Vec::with_capacity(out.len() * rule.order());
            for (q, w) in &out {
                for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let mut p = q.clone();
                    p.push(a + h * t);
                    next.push((p, *w * wt * h));
                }
            }
            out = next;
        }
        out
    }
}

/// Axis-aligned tensor mesh of a parameter domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    pub resolution: usize,
    pub cells: Vec<Cell<T>>,
}

impl<T: Real> Mesh<T> {
    pub fn total_volume(&self) -> T {
        crate::quadrature::compensated_sum(self.cells.iter().map(Cell::volume))
    }
}

impl<T: Real> ParamDomain<T> {
    pub fn new(factors: Vec<Factor<T>>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            let ok = match *f {
                Factor::Quadrant { extent } => extent > T::zero(),
                Factor::Interval { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
                Factor::Periodic { start, period } => period > T::zero() && period.is_finite() && start.is_finite(),
            };
            if !ok {
                return Err(Error::ParamDomain(format!("factor {i} is degenerate: {f:?}")));
            }
        }
        Ok(ParamDomain { factors })
    }

    /// The zero-dimensional domain (a point).
    pub fn point() -> Self {
        ParamDomain { factors: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    /// Axes carrying a `[0, ∞)` quadrant factor.
    pub fn quadrant_axes(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.factors[i].is_quadrant()).collect()
    }

    pub fn corner_degree(&self) -> usize {
        self.quadrant_axes().len()
    }

    pub fn contains(&self, q: &[T], slack: T) -> bool {
        q.len() == self.dim()
            && self.factors.iter().zip(q).all(|(f, &v)| match f {
                Factor::Periodic { .. } => v.is_finite(),
                _ => {
                    let (a, b) = f.bounds();
                    v >= a - slack && v <= b + slack
                }
            })
    }

    /// Number of quadrant coordinates of `q` within 1e-12 of zero.
    pub fn degeneracy_index(&self, q: &[T]) -> Result<usize> {
        if !self.contains(q, T::zero()) {
            return Err(Error::ParamDomain(format!("point {q:?} lies outside the parameter domain")));
        }
        let eps = T::lit(DEGENERACY_TOL);
        Ok(self.factors.iter().zip(q).filter(|(f, &v)| f.is_quadrant() && v.abs() <= eps).count())
    }

    pub fn volume(&self) -> T {
        self.factors.iter().fold(T::one(), |v, f| {
            let (a, b) = f.bounds();
            v * (b - a)
        })
    }

    pub fn diameter(&self) -> T {
        self.factors
            .iter()
            .fold(T::zero(), |s, f| {
                let (a, b) = f.bounds();
                s + (b - a) * (b - a)
            })
            .sqrt()
    }

    /// Wraps periodic coordinates into their fundamental interval and clamps the rest.
    pub fn normalize(&self, q: &mut [T]) {
        for (f, v) in self.factors.iter().zip(q.iter_mut()) {
            match *f {
                Factor::Periodic { start, period } => {
                    let k = ((*v - start) / period).floor();
                    *v -= k * period;
                    if *v >= start + period {
                        *v = start;
                    }
                }
                _ => {
                    let (a, b) = f.bounds();
                    *v = v.max(a).min(b);
                }
            }
        }
    }

    fn check_meshable(&self) -> Result<()> {
        if self.factors.iter().any(|f| !f.bounds().1.is_finite()) {
            return Err(Error::ParamDomain("cannot mesh an unbounded quadrant factor".into()));
        }
        Ok(())
    }

    /// Tensor mesh with `resolution` cells per axis, in row-major cell order.
    pub fn mesh(&self, resolution: usize) -> Result<Mesh<T>> {
        self.check_meshable()?;
        let resolution = resolution.max(1);
        let n = self.dim();
        let count = resolution.pow(n as u32);
        let r = T::of_usize(resolution);
        let mut cells = Vec::with_capacity(count);
        for linear in 0..count {
            let index = unravel(linear, resolution, n);
            let mut lo = Vec::with_capacity(n);
            let mut hi = Vec::with_capacity(n);
            for (f, &k) in self.factors.iter().zip(&index) {
                let (a, b) = f.bounds();
                let h = (b - a) / r;
                lo.push(a + h * T::of_usize(k));
                hi.push(if k + 1 == resolution { b } else { a + h * T::of_usize(k + 1) });
            }
            cells.push(Cell { index, lo, hi });
        }
        Ok(Mesh { resolution, cells })
    }

    /// Mesh vertices (periodic axes omit the duplicated end point).
    pub fn vertices(&self, resolution: usize) -> Result<Vec<Vec<T>>> {
        self.check_meshable()?;
        let resolution = resolution.max(1);
        let per_axis: Vec<Vec<T>> = self
            .factors
            .iter()
            .map(|f| {
                let (a, b) = f.bounds();
                let h = (b - a) / T::of_usize(resolution);
                let count = if f.is_periodic() { resolution } else { resolution + 1 };
                (0..count).map(|k| if k == resolution { b } else { a + h * T::of_usize(k) }).collect()
            })
            .collect();
        let mut out: Vec<Vec<T>> = vec![Vec::new()];
        for axis in per_axis {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// Index of the cell containing `q`, treating points on shared faces as
    /// belonging to the lower cell's upper neighbour.
    pub fn cell_index(&self, q: &[T], resolution: usize) -> Option<usize> {
        if !self.contains(q, T::lit(DEGENERACY_TOL)) {
            return None;
        }
        let mut q = q.to_vec();
        self.normalize(&mut q);
        let index: Vec<usize> = self
            .factors
            .iter()
            .zip(&q)
            .map(|(f, &v)| {
                let (a, b) = f.bounds();
                let t = ((v - a) / (b - a) * T::of_usize(resolution)).floor();
                t.to_usize().unwrap_or(0).min(resolution - 1)
            })
            .collect();
        Some(ravel(&index, resolution))
    }

    /// The domain with `axis` removed (the face where that coordinate is frozen at 0).
    pub fn face(&self, axis: usize) -> ParamDomain<T> {
        let mut factors = self.factors.clone();
        factors.remove(axis);
        ParamDomain { factors }
    }
}

pub(crate) fn unravel(mut linear: usize, resolution: usize, dim: usize) -> Vec<usize> {
    let mut index = vec![0; dim];
    for slot in index.iter_mut().rev() {
        *slot = linear % resolution;
        linear /= resolution;
    }
    index
}

pub(crate) fn ravel(index: &[usize], resolution: usize) -> usize {
    index.iter().fold(0, |acc, &k| acc * resolution + k)
}
