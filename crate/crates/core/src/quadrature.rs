//! Gauss–Legendre rules, compensated summation and adaptive 1-d integration.

use crate::error::{Error, Result};
use crate::jet::Number;
use crate::scalar::Real;

/// Gauss–Legendre rule mapped to the unit interval `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    /// `order` nodes; exact for polynomials of degree `2·order − 1`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let (x, w) = legendre_nodes::<T>(order);
        let half = T::lit(0.5);
        GaussRule { nodes: x.iter().map(|&t| (t + T::one()) * half).collect(), weights: w.iter().map(|&t| t * half).collect() }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<N: Number<T>>(&self, a: T, b: T, f: &dyn Fn(T) -> Result<N>) -> Result<N> {
        let h = b - a;
        let mut acc: Option<N> = None;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let term = f(a + h * t)?.scale(w * h);
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(&term),
            });
        }
        Ok(acc.expect("rule has nodes"))
    }
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn legendre_nodes<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nt = T::of_usize(n);
    let two = T::lit(2.0);
    for i in 0..n.div_ceil(2) {
        let mut z = (T::PI() * (T::of_usize(i) + T::lit(0.75)) / (nt + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != T::zero() {
            dp = d;
        }
        let weight = two / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = T::zero();
    }
    (x, w)
}

fn legendre_with_derivative<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kt = T::of_usize(k);
        let p2 = ((T::lit(2.0) * kt - T::one()) * z * p1 - (kt - T::one()) * p0) / kt;
        p0 = p1;
        p1 = p2;
    }
    let nt = T::of_usize(n);
    let dp = nt * (z * p1 - p0) / (z * z - T::one());
    (p1, dp)
}

/// Neumaier-compensated running sum; order of additions is the caller's.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        CompensatedSum { sum: T::zero(), compensation: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut s = CompensatedSum::new();
    for x in xs {
        s.add(x);
    }
    s.total()
}

const ADAPTIVE_ORDER: usize = 10;
const ADAPTIVE_MAX_DEPTH: usize = 40;

/// Adaptive Gauss–Legendre on `[a, b]` to absolute tolerance `tol`.
///
/// Compares one 10-point panel against its two halves and bisects until the
/// largest coefficient of the difference is within the panel's share of `tol`.
pub fn adaptive_gauss<T: Real, N: Number<T>>(f: &dyn Fn(T) -> Result<N>, a: T, b: T, tol: T) -> Result<N> {
    let rule = GaussRule::new(ADAPTIVE_ORDER);
    let whole = rule.integrate(a, b, f)?;
    adaptive_step(&rule, f, a, b, whole, tol, 0)
}

fn adaptive_step<T: Real, N: Number<T>>(
    rule: &GaussRule<T>,
    f: &dyn Fn(T) -> Result<N>,
    a: T,
    b: T,
    whole: N,
    tol: T,
    depth: usize,
) -> Result<N> {
    let mid = (a + b) * T::lit(0.5);
    let left = rule.integrate(a, mid, f)?;
    let right = rule.integrate(mid, b, f)?;
    let halves = left.add(&right);
    if halves.sub(&whole).magnitude() <= tol {
        return Ok(halves);
    }
    if depth >= ADAPTIVE_MAX_DEPTH {
        return Err(Error::Domain(format!("adaptive quadrature did not reach tolerance {tol} on [{a}, {b}]")));
    }
    let half_tol = tol * T::lit(0.5);
    let l = adaptive_step(rule, f, a, mid, left, half_tol, depth + 1)?;
    let r = adaptive_step(rule, f, mid, b, right, half_tol, depth + 1)?;
    Ok(l.add(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_one_and_nodes_symmetric() {
        for n in 1..=12 {
            let r = GaussRule::<f64>::new(n);
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for i in 0..n {
                assert_abs_diff_eq!(r.nodes[i] + r.nodes[n - 1 - i], 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_degree_two_n_minus_one() {
        for n in 1..=8 {
            let r = GaussRule::<f64>::new(n);
            let deg = 2 * n - 1;
            let v: f64 = r.integrate(0.0, 1.0, &|t: f64| Ok(t.powi(deg as i32))).unwrap();
            assert_abs_diff_eq!(v, 1.0 / (deg as f64 + 1.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn five_point_nodes_match_tabulated_values() {
        let (x, w) = legendre_nodes::<f64>(5);
        assert_abs_diff_eq!(x[4], 0.906_179_845_938_664, epsilon = 1e-14);
        assert_abs_diff_eq!(w[4], 0.236_926_885_056_189, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], 128.0 / 225.0, epsilon = 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |t: f64| Ok(1.0 / (1e-4 + (t - 0.3) * (t - 0.3)));
        let v: f64 = adaptive_gauss(&f, 0.0, 1.0, 1e-10).unwrap();
        let exact = 100.0 * ((0.7f64 / 0.01).atan() + (0.3f64 / 0.01).atan());
        assert_abs_diff_eq!(v, exact, epsilon = 1e-8);
    }
}
