//! Dense helpers for the small matrices that appear here (at most a few dozen entries).

use crate::scalar::Real;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<T: Real>(m: &[Vec<T>]) -> T {
    let n = m.len();
    if n == 0 {
        return T::one();
    }
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut d = T::one();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap_or(std::cmp::Ordering::Equal)).unwrap();
        if a[p][c] == T::zero() {
            return T::zero();
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    d
}

/// Solves `A x = b`; `None` when `A` is numerically singular.
pub fn solve<T: Real>(m: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m
        .iter()
        .zip(b)
        .map(|(r, &bi)| {
            let mut row = r.clone();
            row.push(bi);
            row
        })
        .collect();
    let scale = m.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    let tiny = scale * T::epsilon() * T::lit(16.0);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[p][c].abs() <= tiny {
            return None;
        }
        a.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    let v = a[c][k];
                    a[r][k] -= f * v;
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Columns of a row-major matrix.
pub fn columns<T: Real>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

pub fn mat_vec<T: Real>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter().map(|r| r.iter().zip(v).fold(T::zero(), |s, (&a, &b)| s + a * b)).collect()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Gram matrix `VᵀV` of a list of vectors.
pub fn gram<T: Real>(vs: &[Vec<T>]) -> Vec<Vec<T>> {
    vs.iter().map(|a| vs.iter().map(|b| dot(a, b)).collect()).collect()
}

/// Orthonormal basis of `span(vs)` (modified Gram–Schmidt); drops directions below `tol`.
pub fn orthonormalize<T: Real>(vs: &[Vec<T>], tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for b in &basis {
            let c = dot(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * *bi;
            }
        }
        let n = crate::scalar::norm(&w);
        if n > tol {
            basis.push(w.iter().map(|&x| x / n).collect());
        }
    }
    basis
}

/// Frobenius norm of `(I − P_B)·A` for orthonormal bases `A`, `B`.
///
/// Zero iff `span A ⊆ span B`; bounds the sine of the largest principal angle
/// from above.
pub fn subspace_gap<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    let mut total = T::zero();
    for v in a {
        let mut w = v.clone();
        for u in b {
            let c = dot(&w, u);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * *ui;
            }
        }
        total += dot(&w, &w);
    }
    total.sqrt()
}
