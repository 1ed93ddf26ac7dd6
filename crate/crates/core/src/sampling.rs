//! Deterministic quasi-random sample points (Halton sequence).

use crate::scalar::Real;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` points of the `dim`-dimensional Halton sequence in `[0, 1)^dim`,
/// starting after `seed` skipped indices.
pub fn halton<T: Real>(dim: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
    (0..count as u64)
        .map(|k| {
            let i = k + 1 + seed;
            (0..dim).map(|d| T::lit(radical_inverse(i, PRIMES[d]))).collect()
        })
        .collect()
}
