use crate::error::{Error, Result};
use crate::expr::SmoothMap;
use crate::linalg;
use crate::sampling::halton;
use crate::scalar::{self, Real};

use super::tol;

/// Number of quasi-random points used for pointwise group checks.
pub const GROUP_SAMPLES: usize = 64;

/// The open set of `ℝᴺ` a chart lives on.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartDomain<T> {
    Box {
        lo: Vec<T>,
        hi: Vec<T>,
    },
    Ball {
        center: Vec<T>,
        radius: T,
    },
    /// Diffeomorphic image of another domain.
    Image {
        base: std::boxed::Box<ChartDomain<T>>,
        forward: SmoothMap,
        inverse: SmoothMap,
    },
}

impl<T: Real> ChartDomain<T> {
    pub fn dim(&self) -> usize {
        match self {
            ChartDomain::Box { lo, .. } => lo.len(),
            ChartDomain::Ball { center, .. } => center.len(),
            ChartDomain::Image { forward, .. } => forward.coarity(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ChartDomain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::Dimension("box bounds must be nonempty and of equal length".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Precondition("box chart domain is degenerate".into()));
                }
            }
            ChartDomain::Ball { center, radius } => {
                if center.is_empty() || !(*radius > T::zero()) {
                    return Err(Error::Precondition("ball chart domain is degenerate".into()));
                }
            }
            ChartDomain::Image { base, forward, inverse } => {
                base.validate()?;
                if forward.arity() != base.dim() || inverse.coarity() != base.dim() || inverse.arity() != forward.coarity() {
                    return Err(Error::Dimension("image domain maps do not match base dimension".into()));
                }
            }
        }
        Ok(())
    }

    /// Membership with slack `slack` (outward).
    pub fn contains(&self, x: &[T], slack: T) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ChartDomain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&a, &b))| v >= a - slack && v <= b + slack),
            ChartDomain::Ball { center, radius } => scalar::dist(x, center) <= *radius + slack,
            ChartDomain::Image { base, inverse, .. } => match inverse.eval(x) {
                Ok(y) => base.contains(&y, slack),
                Err(_) => false,
            },
        }
    }

    /// `count` deterministic quasi-random points inside the domain.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<Vec<T>> {
        match self {
            ChartDomain::Box { lo, hi } => halton::<T>(lo.len(), count, seed)
                .into_iter()
                .map(|u| u.iter().zip(lo.iter().zip(hi)).map(|(&t, (&a, &b))| a + (b - a) * t).collect())
                .collect(),
            ChartDomain::Ball { center, radius } => {
                let n = center.len();
                let mut out = Vec::with_capacity(count);
                let mut skip = seed;
                while out.len() < count {
                    for u in halton::<T>(n, 4 * count, skip) {
                        let p: Vec<T> = u.iter().map(|&t| T::lit(2.0) * t - T::one()).collect();
                        if scalar::norm(&p) < T::one() {
                            out.push(p.iter().zip(center).map(|(&v, &c)| c + *radius * v).collect());
                            if out.len() == count {
                                break;
                            }
                        }
                    }
                    skip += 4 * count as u64;
                }
                out
            }
            ChartDomain::Image { base, forward, .. } => {
                base.samples(count, seed).into_iter().filter_map(|p| forward.eval(&p).ok()).collect()
            }
        }
    }

    /// Diameter (exact for boxes and balls, sampled for images).
    pub fn diameter(&self) -> T {
        match self {
            ChartDomain::Box { lo, hi } => scalar::dist(lo, hi),
            ChartDomain::Ball { radius, .. } => T::lit(2.0) * *radius,
            ChartDomain::Image { .. } => {
                let pts = self.samples(GROUP_SAMPLES, 0);
                let mut d = T::zero();
                for a in &pts {
                    for b in &pts {
                        d = d.max(scalar::dist(a, b));
                    }
                }
                d
            }
        }
    }
}

/// A finite group given by its multiplication table and one map per element.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAction {
    pub elements: Vec<SmoothMap>,
    /// `table[g][h]` is the index of `g·h`.
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
    pub names: Vec<String>,
}

impl GroupAction {
    pub fn trivial(dim: usize) -> Self {
        GroupAction { elements: vec![SmoothMap::identity(dim)], table: vec![vec![0]], identity: 0, names: vec!["e".into()] }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn inverse(&self, g: usize) -> usize {
        (0..self.order()).find(|&h| self.table[g][h] == self.identity).expect("validated group")
    }

    /// Exact check of the group axioms on the table.
    pub fn check_axioms(&self) -> Result<()> {
        let n = self.elements.len();
        if n == 0 {
            return Err(Error::Group("empty group".into()));
        }
        if self.table.len() != n || self.table.iter().any(|r| r.len() != n) {
            return Err(Error::Group(format!("multiplication table must be {n}×{n}")));
        }
        if self.table.iter().flatten().any(|&v| v >= n) {
            return Err(Error::Group("table entry out of range (closure fails)".into()));
        }
        let e = self.identity;
        if e >= n {
            return Err(Error::Group("identity index out of range".into()));
        }
        for g in 0..n {
            if self.table[e][g] != g || self.table[g][e] != g {
                return Err(Error::Group(format!("element {g} violates the identity law")));
            }
            let has_inverse = (0..n).any(|h| self.table[g][h] == e && self.table[h][g] == e);
            if !has_inverse {
                return Err(Error::Group(format!("element {g} has no inverse")));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.table[self.table[a][b]][c] != self.table[a][self.table[b][c]] {
                        return Err(Error::Group(format!("associativity fails for ({a}, {b}, {c})")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A chart: open set of `ℝᴺ` with a finite group acting by diffeomorphisms.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart<T> {
    domain: ChartDomain<T>,
    group: GroupAction,
    seed: u64,
}

/// The ineffective subgroup `G₀` and the effective order `#G_e = |G|/|G₀|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectiveQuotient {
    pub ineffective: Vec<usize>,
    pub group_order: usize,
    pub effective_order: usize,
}

impl<T: Real> Chart<T> {
    pub fn trivial(domain: ChartDomain<T>) -> Result<Self> {
        let dim = domain.dim();
        Self::new(domain, GroupAction::trivial(dim))
    }

    pub fn new(domain: ChartDomain<T>, group: GroupAction) -> Result<Self> {
        Self::with_seed(domain, group, 0)
    }

    /// Validates the group axioms, that the identity acts as the identity,
    /// that the action is compatible with the table and that every element is
    /// a local diffeomorphism at the sample points.
    pub fn with_seed(domain: ChartDomain<T>, group: GroupAction, seed: u64) -> Result<Self> {
        domain.validate()?;
        group.check_axioms()?;
        let n = domain.dim();
        for (g, m) in group.elements.iter().enumerate() {
            if m.arity() != n || m.coarity() != n {
                return Err(Error::Dimension(format!("group element {g} is not a map ℝ^{n} → ℝ^{n}")));
            }
        }
        let chart = Chart { domain, group, seed };
        chart.check_action()?;
        Ok(chart)
    }

    fn check_action(&self) -> Result<()> {
        let eps: T = tol(1e-9);
        let samples = self.samples(GROUP_SAMPLES);
        for x in &samples {
            let ex = self.act(self.group.identity, x)?;
            if scalar::max_abs_diff(&ex, x) > eps {
                return Err(Error::Group("identity element does not act as the identity".into()));
            }
            for g in 0..self.order() {
                let jac = self.group.elements[g].jacobian(x)?;
                if linalg::det(&jac).abs() <= eps {
                    return Err(Error::Group(format!("element {g} is not a local diffeomorphism at {x:?}")));
                }
                for h in 0..self.order() {
                    let hx = self.act(h, x)?;
                    let ghx = self.act(g, &hx)?;
                    let direct = self.act(self.group.table[g][h], x)?;
                    if scalar::max_abs_diff(&ghx, &direct) > eps {
                        return Err(Error::Group(format!("φ_{g}∘φ_{h} differs from φ_{} at {x:?}", self.group.table[g][h])));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ChartDomain<T> {
        &self.domain
    }

    pub fn group(&self) -> &GroupAction {
        &self.group
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    pub fn element(&self, g: usize) -> &SmoothMap {
        &self.group.elements[g]
    }

    pub fn act(&self, g: usize, x: &[T]) -> Result<Vec<T>> {
        self.group.elements[g].eval(x)
    }

    pub fn samples(&self, count: usize) -> Vec<Vec<T>> {
        self.domain.samples(count, self.seed)
    }

    /// `G₀` detected as the elements moving no sample point by more than 1e-9.
    pub fn effective_quotient(&self) -> Result<EffectiveQuotient> {
        let samples = self.samples(GROUP_SAMPLES);
        self.effective_quotient_on(&samples)
    }

    pub(crate) fn effective_quotient_on(&self, samples: &[Vec<T>]) -> Result<EffectiveQuotient> {
        let eps: T = tol(1e-9);
        let mut ineffective = Vec::new();
        for g in 0..self.order() {
            let mut moved = T::zero();
            for x in samples {
                moved = moved.max(scalar::max_abs_diff(&self.act(g, x)?, x));
            }
            if moved <= eps {
                ineffective.push(g);
            }
        }
        let table = &self.group.table;
        for &k in &ineffective {
            for g in 0..self.order() {
                let conj = table[table[g][k]][self.group.inverse(g)];
                if !ineffective.contains(&conj) {
                    return Err(Error::Group("ineffective part is not a normal subgroup".into()));
                }
            }
        }
        let order = self.order();
        debug_assert_eq!(order % ineffective.len(), 0);
        Ok(EffectiveQuotient { effective_order: order / ineffective.len(), group_order: order, ineffective })
    }

    /// The chart restricted to `domain` with the subgroup `elements` (must be closed).
    pub fn subgroup(&self, elements: &[usize], domain: ChartDomain<T>) -> Result<Chart<T>> {
        let position = |g: usize| elements.iter().position(|&h| h == g);
        let identity = position(self.group.identity).ok_or_else(|| Error::Group("subgroup must contain the identity".into()))?;
        let mut table = Vec::with_capacity(elements.len());
        for &a in elements {
            let row = elements
                .iter()
                .map(|&b| position(self.group.table[a][b]).ok_or_else(|| Error::Group("subset is not closed".into())))
                .collect::<Result<Vec<_>>>()?;
            table.push(row);
        }
        let group = GroupAction {
            elements: elements.iter().map(|&g| self.group.elements[g].clone()).collect(),
            table,
            identity,
            names: elements.iter().map(|&g| self.group.names.get(g).cloned().unwrap_or_default()).collect(),
        };
        Chart::with_seed(domain, group, self.seed)
    }

    /// Elements fixing `x` to within `eps`.
    pub fn stabilizer(&self, x: &[T], eps: T) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for g in 0..self.order() {
            if scalar::dist(&self.act(g, x)?, x) <= eps {
                out.push(g);
            }
        }
        Ok(out)
    }
}
