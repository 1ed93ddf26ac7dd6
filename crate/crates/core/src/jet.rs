//! Forward-mode automatic differentiation.
//!
//! [`Jet`] is a truncated multivariate Taylor expansion in a runtime number of
//! nilpotent infinitesimals `ε_0, ε_1, …` with `ε_i² = 0`. One infinitesimal
//! gives ordinary dual numbers, two give hyper-dual numbers, and nesting
//! further (a Lie bracket inside a Lie bracket, the exterior derivative of a
//! quadrature-defined form) just adds another bit. Coefficients are indexed
//! by the bitmask of the infinitesimals they multiply.

use std::fmt::Debug;

use crate::error::Result;
use crate::scalar::Real;

/// Arithmetic needed to evaluate expressions: implemented by plain scalars and by [`Jet`].
pub trait Number<T: Real>: Clone + Debug + Send + Sync {
    fn constant(c: T) -> Self;
    /// The real (non-infinitesimal) part.
    fn value(&self) -> T;
    /// True when the number carries no infinitesimal part.
    fn is_plain(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Unchecked division; callers guard against a zero real part.
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: T) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// Largest absolute coefficient.
    fn magnitude(&self) -> T;
    fn is_finite(&self) -> bool;
}

impl<T: Real> Number<T> for T {
    fn constant(c: T) -> Self {
        c
    }
    fn value(&self) -> T {
        *self
    }
    fn is_plain(&self) -> bool {
        true
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn div(&self, o: &Self) -> Self {
        *self / *o
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn scale(&self, c: T) -> Self {
        *self * c
    }
    fn powi(&self, n: i32) -> Self {
        num_traits::Float::powi(*self, n)
    }
    fn sin(&self) -> Self {
        num_traits::Float::sin(*self)
    }
    fn cos(&self) -> Self {
        num_traits::Float::cos(*self)
    }
    fn exp(&self) -> Self {
        num_traits::Float::exp(*self)
    }
    fn sqrt(&self) -> Self {
        num_traits::Float::sqrt(*self)
    }
    fn magnitude(&self) -> T {
        num_traits::Float::abs(*self)
    }
    fn is_finite(&self) -> bool {
        num_traits::Float::is_finite(*self)
    }
}

/// Truncated Taylor expansion in nilpotent infinitesimals.
///
/// `coeffs.len()` is always a power of two; a jet with `2^k` coefficients
/// involves `ε_0 … ε_{k-1}`. Jets of different lengths combine by treating
/// the missing coefficients as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn from_value(c: T) -> Self {
        Jet { coeffs: vec![c] }
    }

    /// `value + slope·ε_bit`.
    pub fn seeded(value: T, bit: usize, slope: T) -> Self {
        let mut coeffs = vec![T::zero(); 2 << bit];
        coeffs[0] = value;
        coeffs[1 << bit] = slope;
        Jet { coeffs }
    }

    /// The pure infinitesimal `ε_bit`.
    pub fn epsilon(bit: usize) -> Self {
        Self::seeded(T::zero(), bit, T::one())
    }

    /// Number of infinitesimals this jet is expressed in.
    pub fn bits(&self) -> usize {
        self.coeffs.len().trailing_zeros() as usize
    }

    pub fn coeff(&self, mask: usize) -> T {
        self.coeffs.get(mask).copied().unwrap_or_else(T::zero)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `ε_bit` split off as a jet in the lower infinitesimals.
    /// `bit` must be the highest infinitesimal in use.
    pub fn eps_part(&self, bit: usize) -> Self {
        let lo = 1 << bit;
        if self.coeffs.len() <= lo {
            return Jet::from_value(T::zero());
        }
        debug_assert_eq!(self.coeffs.len(), 2 * lo, "eps_part on a non-top infinitesimal");
        Jet { coeffs: self.coeffs[lo..2 * lo].to_vec() }
    }

    /// Drops `ε_bit` (and anything above it).
    pub fn truncate(&self, bit: usize) -> Self {
        let lo = 1 << bit;
        if self.coeffs.len() <= lo {
            return self.clone();
        }
        Jet { coeffs: self.coeffs[..lo].to_vec() }
    }

    fn zip_with(&self, o: &Self, f: impl Fn(T, T) -> T) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let coeffs = (0..n).map(|i| f(self.coeff(i), o.coeff(i))).collect();
        Jet { coeffs }
    }

    /// `Σ_n f⁽ⁿ⁾(a₀)/n! · hⁿ` where `h` is the infinitesimal part; `derivs[n] = f⁽ⁿ⁾(a₀)`.
    fn compose(&self, derivs: &[T]) -> Self {
        let k = self.bits();
        if k == 0 {
            return Jet::from_value(derivs[0]);
        }
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let mut out = Jet { coeffs: vec![T::zero(); self.coeffs.len()] };
        out.coeffs[0] = derivs[0];
        let mut power = h.clone();
        let mut factorial = T::one();
        for (n, &d) in derivs.iter().enumerate().take(k + 1).skip(1) {
            factorial *= T::of_usize(n);
            let c = d / factorial;
            if c != T::zero() {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += c * *p;
                }
            }
            if n < k {
                power = power.mul(&h);
            }
        }
        out
    }
}

impl<T: Real> Number<T> for Jet<T> {
    fn constant(c: T) -> Self {
        Jet::from_value(c)
    }
    fn value(&self) -> T {
        self.coeffs[0]
    }
    fn is_plain(&self) -> bool {
        self.coeffs[1..].iter().all(|c| *c == T::zero())
    }
    fn add(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a + b)
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a - b)
    }
    fn mul(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut coeffs = vec![T::zero(); n];
        for (a, &x) in self.coeffs.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            for (b, &y) in o.coeffs.iter().enumerate() {
                if a & b == 0 {
                    coeffs[a | b] += x * y;
                }
            }
        }
        Jet { coeffs }
    }
    fn div(&self, o: &Self) -> Self {
        let x = o.value();
        let k = o.bits();
        // d^n/dx^n x^{-1} = (-1)^n n! x^{-n-1}
        let mut derivs = Vec::with_capacity(k + 1);
        let mut d = x.recip();
        for n in 0..=k {
            derivs.push(d);
            d = -d * T::of_usize(n + 1) / x;
        }
        self.mul(&o.compose(&derivs))
    }
    fn neg(&self) -> Self {
        Jet { coeffs: self.coeffs.iter().map(|&c| -c).collect() }
    }
    fn scale(&self, c: T) -> Self {
        Jet { coeffs: self.coeffs.iter().map(|&x| x * c).collect() }
    }
    fn powi(&self, n: i32) -> Self {
        let x = self.value();
        let k = self.bits();
        let mut derivs = Vec::with_capacity(k + 1);
        let mut factor = T::one();
        for j in 0..=k as i32 {
            if j > 0 {
                factor *= T::lit(f64::from(n - j + 1));
            }
            if factor == T::zero() {
                derivs.push(T::zero());
            } else {
                derivs.push(factor * num_traits::Float::powi(x, n - j));
            }
        }
        self.compose(&derivs)
    }
    fn sin(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [s, c, -s, -c];
        let derivs: Vec<T> = (0..=self.bits()).map(|n| cycle[n % 4]).collect();
        self.compose(&derivs)
    }
    fn cos(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [c, -s, -c, s];
        let derivs: Vec<T> = (0..=self.bits()).map(|n| cycle[n % 4]).collect();
        self.compose(&derivs)
    }
    fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.bits() + 1])
    }
    fn sqrt(&self) -> Self {
        let x = self.value();
        let half = T::lit(0.5);
        let mut derivs = Vec::with_capacity(self.bits() + 1);
        let mut factor = T::one();
        let mut power = half;
        for _ in 0..=self.bits() {
            derivs.push(factor * x.powf(power));
            factor *= power;
            power -= T::one();
        }
        self.compose(&derivs)
    }
    fn magnitude(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }
    fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Index of the first infinitesimal not used by any of `xs`.
pub fn next_bit<T: Real>(xs: &[Jet<T>]) -> usize {
    xs.iter().map(Jet::bits).max().unwrap_or(0)
}

pub fn lift<T: Real>(x: &[T]) -> Vec<Jet<T>> {
    x.iter().map(|&v| Jet::from_value(v)).collect()
}

pub fn values<T: Real>(x: &[Jet<T>]) -> Vec<T> {
    x.iter().map(Number::value).collect()
}

/// Directional derivative of a vector-valued `f` at `x` along `dir`, both possibly jets.
///
/// Introduces one fresh infinitesimal above everything in `x` and `dir`;
/// returns `(f(x), Df(x)·dir)` expressed in the original infinitesimals.
pub fn directional<T, F>(x: &[Jet<T>], dir: &[Jet<T>], f: F) -> Result<(Vec<Jet<T>>, Vec<Jet<T>>)>
where
    T: Real,
    F: FnOnce(&[Jet<T>]) -> Result<Vec<Jet<T>>>,
{
    let bit = next_bit(x).max(next_bit(dir));
    let eps = Jet::epsilon(bit);
    let lifted: Vec<Jet<T>> = x.iter().zip(dir).map(|(xi, di)| xi.add(&di.mul(&eps))).collect();
    let out = f(&lifted)?;
    let value = out.iter().map(|y| y.truncate(bit)).collect();
    let slope = out.iter().map(|y| y.eps_part(bit)).collect();
    Ok((value, slope))
}
