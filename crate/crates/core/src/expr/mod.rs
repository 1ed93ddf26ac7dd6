//! A small expression language for maps, group elements, vector fields and
//! form coefficients.
//!
//! Expressions are scalar-agnostic: literals are exact [`Rational`]s and are
//! promoted to the evaluation scalar only when evaluated. Evaluation is
//! generic over [`Number`], so the same tree yields values, Jacobians and
//! higher directional derivatives.

mod parse;

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{self, Jet, Number};
use crate::scalar::Real;
use crate::Rational;

pub use parse::parse_expression;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    /// Argument must be non-negative; strictly positive when differentiated.
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Expression tree. `Div` denominators must be nonzero and `Sqrt` arguments
/// non-negative; evaluation outside those domains is an error, never NaN.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(Rational),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(r: Rational) -> Self {
        Expr::Const(r)
    }

    pub fn integer(n: i64) -> Self {
        Expr::Const(Rational::from_integer(n))
    }

    /// One more than the largest variable index used (0 for closed expressions).
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.min_arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.min_arity().max(b.min_arity()),
        }
    }

    /// The literal value if the expression is a bare constant.
    pub fn as_const(&self) -> Option<Rational> {
        match self {
            Expr::Const(r) => Some(*r),
            _ => None,
        }
    }

    /// Replaces every `x_i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Result<Expr> {
        Ok(match self {
            Expr::Var(i) => subs.get(*i).cloned().ok_or(Error::VariableOutOfRange { index: *i, arity: subs.len() })?,
            Expr::Const(r) => Expr::Const(*r),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(subs)?)),
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(subs)?), Box::new(b.substitute(subs)?)),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(subs)?), Box::new(b.substitute(subs)?)),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(subs)?), Box::new(b.substitute(subs)?)),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(subs)?), Box::new(b.substitute(subs)?)),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(subs)?), *n),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(subs)?)),
        })
    }

    /// Evaluates over any [`Number`] type. Variables index into `x`.
    pub fn eval<T: Real, N: Number<T>>(&self, x: &[N]) -> Result<N> {
        let out = match self {
            Expr::Var(i) => return x.get(*i).cloned().ok_or(Error::VariableOutOfRange { index: *i, arity: x.len() }),
            Expr::Const(r) => return Ok(N::constant(T::of_rational(r))),
            Expr::Neg(a) => a.eval(x)?.neg(),
            Expr::Add(a, b) => a.eval(x)?.add(&b.eval(x)?),
            Expr::Sub(a, b) => a.eval(x)?.sub(&b.eval(x)?),
            Expr::Mul(a, b) => a.eval(x)?.mul(&b.eval(x)?),
            Expr::Div(a, b) => {
                let den = b.eval(x)?;
                if den.value() == T::zero() {
                    return Err(Error::Domain(format!("division by zero in `{self}`")));
                }
                a.eval(x)?.div(&den)
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x)?;
                if *n < 0 && base.value() == T::zero() {
                    return Err(Error::Domain(format!("zero raised to negative power in `{self}`")));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let arg = a.eval(x)?;
                match f {
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Exp => arg.exp(),
                    Func::Sqrt => {
                        let v = arg.value();
                        if v < T::zero() || (v == T::zero() && !arg.is_plain()) {
                            return Err(Error::Domain(format!("sqrt of non-positive argument in `{self}`")));
                        }
                        arg.sqrt()
                    }
                }
            }
        };
        if !out.is_finite() {
            return Err(Error::Domain(format!("non-finite value in `{self}`")));
        }
        Ok(out)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Var(_) | Expr::Call(..) => 5,
            Expr::Const(r) if r.is_integer() && *r.numer() >= 0 => 5,
            Expr::Const(_) => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Const(r) => {
                if r.is_integer() && *r.numer() >= 0 {
                    write!(f, "{}", r.numer())
                } else if r.is_integer() {
                    write!(f, "(-{})", -r.numer())
                } else if *r.numer() < 0 {
                    write!(f, "(-{}/{})", -r.numer(), r.denom())
                } else {
                    write!(f, "({}/{})", r.numer(), r.denom())
                }
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 3)
            }
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, " / ")?;
                child(f, b, 3)
            }
            Expr::Pow(a, n) => {
                child(f, a, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A smooth map `ℝᵐ → ℝᵖ` given by `p` expressions in `x0..x{m-1}`.
///
/// Immutable after construction; evaluation is pure.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothMap {
    arity: usize,
    components: Vec<Expr>,
}

impl SmoothMap {
    pub fn new(arity: usize, components: Vec<Expr>) -> Result<Self> {
        for c in &components {
            let need = c.min_arity();
            if need > arity {
                return Err(Error::VariableOutOfRange { index: need - 1, arity });
            }
        }
        Ok(SmoothMap { arity, components })
    }

    pub fn parse<S: AsRef<str>>(arity: usize, components: &[S]) -> Result<Self> {
        let components = components.iter().map(|c| parse_expression(c.as_ref(), arity)).collect::<Result<Vec<_>>>()?;
        Ok(SmoothMap { arity, components })
    }

    pub fn identity(n: usize) -> Self {
        SmoothMap { arity: n, components: (0..n).map(Expr::Var).collect() }
    }

    /// `x ↦ M·x + b` with exact rational entries.
    pub fn affine(matrix: &[Vec<Rational>], offset: &[Rational]) -> Result<Self> {
        let arity = matrix.first().map_or(0, Vec::len);
        let mut components = Vec::with_capacity(matrix.len());
        for (row, b) in matrix.iter().zip(offset) {
            if row.len() != arity {
                return Err(Error::Dimension("ragged affine matrix".into()));
            }
            let mut e = Expr::Const(*b);
            for (j, m) in row.iter().enumerate() {
                if *m != Rational::from_integer(0) {
                    let term = Expr::Mul(Box::new(Expr::Const(*m)), Box::new(Expr::Var(j)));
                    e = Expr::Add(Box::new(e), Box::new(term));
                }
            }
            components.push(e);
        }
        Ok(SmoothMap { arity, components })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coarity(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        if inner.coarity() != self.arity {
            return Err(Error::Dimension(format!("cannot compose: inner map has {} outputs, outer takes {}", inner.coarity(), self.arity)));
        }
        let components = self.components.iter().map(|c| c.substitute(&inner.components)).collect::<Result<Vec<_>>>()?;
        Ok(SmoothMap { arity: inner.arity, components })
    }

    /// Freezes trailing variables `x_k..` to exact values, keeping `x_0..x_{k-1}`.
    pub fn fix_trailing(&self, values: &[Rational]) -> Result<SmoothMap> {
        let keep = self.arity.checked_sub(values.len()).ok_or_else(|| Error::Dimension("too many frozen variables".into()))?;
        let subs: Vec<Expr> = (0..keep).map(Expr::Var).chain(values.iter().map(|v| Expr::Const(*v))).collect();
        let components = self.components.iter().map(|c| c.substitute(&subs)).collect::<Result<Vec<_>>>()?;
        Ok(SmoothMap { arity: keep, components })
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if n != self.arity {
            return Err(Error::Dimension(format!("map takes {} inputs, got {n}", self.arity)));
        }
        Ok(())
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.eval_n(x)
    }

    pub fn eval_n<T: Real, N: Number<T>>(&self, x: &[N]) -> Result<Vec<N>> {
        self.check_arity(x.len())?;
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Exact forward-mode Jacobian, `p` rows by `m` columns.
    pub fn jacobian<T: Real>(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.check_arity(x.len())?;
        let mut jac = vec![vec![T::zero(); self.arity]; self.coarity()];
        for j in 0..self.arity {
            let seeded: Vec<Jet<T>> =
                x.iter().enumerate().map(|(i, &v)| if i == j { Jet::seeded(v, 0, T::one()) } else { Jet::from_value(v) }).collect();
            for (row, c) in jac.iter_mut().zip(&self.components) {
                row[j] = c.eval(&seeded)?.coeff(1);
            }
        }
        Ok(jac)
    }

    /// `Df(x)·u`.
    pub fn directional<T: Real>(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        self.check_arity(x.len())?;
        self.check_arity(u.len())?;
        let seeded: Vec<Jet<T>> = x.iter().zip(u).map(|(&v, &d)| Jet::seeded(v, 0, d)).collect();
        self.components.iter().map(|c| Ok(c.eval(&seeded)?.coeff(1))).collect()
    }

    /// Jacobian-vector product where `x` and `u` may themselves carry infinitesimals.
    pub fn directional_n<T: Real>(&self, x: &[Jet<T>], u: &[Jet<T>]) -> Result<Vec<Jet<T>>> {
        self.check_arity(x.len())?;
        self.check_arity(u.len())?;
        Ok(jet::directional(x, u, |y| self.eval_n(y))?.1)
    }

    /// Exact second directional derivative `D²f(x)(u, v)`.
    pub fn second_directional<T: Real>(&self, x: &[T], u: &[T], v: &[T]) -> Result<Vec<T>> {
        self.check_arity(x.len())?;
        self.check_arity(u.len())?;
        self.check_arity(v.len())?;
        let seeded: Vec<Jet<T>> =
            x.iter().zip(u.iter().zip(v)).map(|(&xi, (&ui, &vi))| Jet::seeded(xi, 0, ui).add(&Jet::seeded(T::zero(), 1, vi))).collect();
        self.components.iter().map(|c| Ok(c.eval(&seeded)?.coeff(3))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn map(arity: usize, comps: &[&str]) -> SmoothMap {
        SmoothMap::parse(arity, comps).unwrap()
    }

    #[test]
    fn identity_and_rotation() {
        let id = SmoothMap::identity(2);
        assert_eq!(id.eval(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let rot = map(2, &["-x1", "x0"]);
        assert_eq!(rot.eval(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn sqrt_outside_domain_is_error() {
        let f = map(1, &["sqrt(x0)"]);
        assert!(matches!(f.eval(&[-1.0]), Err(Error::Domain(_))));
        assert_eq!(f.eval(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(f.jacobian(&[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn division_by_zero_and_overflow_are_errors() {
        assert!(matches!(map(1, &["1/x0"]).eval(&[0.0]), Err(Error::Domain(_))));
        assert!(matches!(map(1, &["exp(x0)"]).eval(&[1000.0]), Err(Error::Domain(_))));
        assert!(matches!(map(1, &["x0^-2"]).eval(&[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn jacobian_of_quadratic() {
        // symbolic derivative of (x0², x0·x1) is [[2x0, 0], [x1, x0]]
        let f = map(2, &["x0^2", "x0*x1"]);
        assert_eq!(f.jacobian(&[3.0, 5.0]).unwrap(), vec![vec![6.0, 0.0], vec![5.0, 3.0]]);
    }

    #[test]
    fn linear_map_jacobian_is_constant() {
        let f = map(2, &["2*x0 - x1", "(1/3)*x1"]);
        for x in [[0.0, 0.0], [1.5, -2.0], [10.0, 3.0]] {
            let j = f.jacobian(&x).unwrap();
            assert_abs_diff_eq!(j[0][0], 2.0);
            assert_abs_diff_eq!(j[0][1], -1.0);
            assert_abs_diff_eq!(j[1][0], 0.0);
            assert_abs_diff_eq!(j[1][1], 1.0 / 3.0, epsilon = 1e-16);
        }
    }

    #[test]
    fn second_directional_quadratic_and_sin() {
        let f = map(2, &["x0^2", "3*x0^2"]);
        let d2 = f.second_directional(&[0.7, -1.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(d2, vec![2.0, 6.0]);
        let g = map(1, &["sin(x0)"]);
        let d2 = g.second_directional(&[0.3], &[1.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(d2[0], -0.3f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn second_directional_is_symmetric() {
        let f = map(3, &["sin(x0*x1) + exp(x2)*x0", "x0^3*x1 - sqrt(x2)"]);
        let x = [0.4, -1.3, 2.0];
        let (u, v) = ([0.2, 1.0, -0.5], [1.1, 0.3, 0.7]);
        let a = f.second_directional(&x, &u, &v).unwrap();
        let b = f.second_directional(&x, &v, &u).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-14);
        }
    }

    #[test]
    fn compose_and_fix_trailing() {
        let outer = map(2, &["x0*x1"]);
        let inner = map(1, &["x0 + 1", "2*x0"]);
        let c = outer.compose(&inner).unwrap();
        assert_eq!(c.eval(&[3.0]).unwrap(), vec![24.0]);
        let h = map(2, &["x0 - x1"]);
        let fixed = h.fix_trailing(&[Rational::new(1, 2)]).unwrap();
        assert_eq!(fixed.arity(), 1);
        assert_eq!(fixed.eval(&[2.0]).unwrap(), vec![1.5]);
    }

    #[test]
    fn affine_constructor() {
        let r = |n| Rational::from_integer(n);
        let m = SmoothMap::affine(&[vec![r(1), r(2)], vec![r(0), r(-1)]], &[r(1), r(0)]).unwrap();
        assert_eq!(m.eval(&[1.0, 1.0]).unwrap(), vec![4.0, -1.0]);
    }

    #[test]
    fn evaluation_in_f32() {
        let f = map(1, &["x0^2 + 1/2"]);
        assert_eq!(f.eval(&[2.0f32]).unwrap(), vec![4.5f32]);
    }
}
