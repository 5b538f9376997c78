//! Derivative-free search primitives.

use crate::real::Real;

/// Settings for [`compass_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompassOptions<T> {
    /// Initial poll radius as a fraction of each coordinate's range.
    pub initial_fraction: T,
    /// Search stops once the poll radius falls below this fraction.
    pub min_fraction: T,
    pub max_evals: usize,
}

impl<T: Real> Default for CompassOptions<T> {
    fn default() -> Self {
        Self { initial_fraction: T::lit(0.25), min_fraction: T::lit(1e-4), max_evals: 2000 }
    }
}

/// Outcome of a local search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

/// Opportunistic compass (pattern) search inside the box `[lo, hi]`.
///
/// Each direction is scaled coordinatewise by the current fraction of the box
/// range; trial points are clamped to the box. The first improving direction
/// is taken; a full failed poll halves the fraction. Infinite values act as an
/// extreme barrier.
pub fn compass_search<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    lo: &[T],
    hi: &[T],
    directions: &[Vec<T>],
    opts: &CompassOptions<T>,
) -> SearchResult<T> {
    let range: Vec<T> = lo.iter().zip(hi).map(|(&a, &b)| b - a).collect();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut frac = opts.initial_fraction;
    let mut trial = vec![T::zero(); x.len()];
    let mut start = 0;
    while frac >= opts.min_fraction && evals < opts.max_evals && fx.is_finite() {
        let mut improved = false;
        for s in 0..directions.len() {
            let d = &directions[(start + s) % directions.len()];
            for j in 0..x.len() {
                trial[j] = (x[j] + frac * range[j] * d[j]).clamp_to(lo[j], hi[j]);
            }
            if trial == x {
                continue;
            }
            let ft = f(&trial);
            evals += 1;
            if ft < fx {
                x.copy_from_slice(&trial);
                fx = ft;
                improved = true;
                start = (start + s) % directions.len();
                break;
            }
            if evals >= opts.max_evals {
                break;
            }
        }
        if !improved {
            frac = frac * T::lit(0.5);
        }
    }
    SearchResult { x, value: fx, evals }
}

/// Coordinate directions `±e_j`.
pub fn coordinate_directions<T: Real>(dim: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(2 * dim);
    for j in 0..dim {
        for s in [T::one(), -T::one()] {
            let mut d = vec![T::zero(); dim];
            d[j] = s;
            out.push(d);
        }
    }
    out
}

/// Adds `±` the indicator of `group` to `dirs`.
pub fn push_group_direction<T: Real>(dirs: &mut Vec<Vec<T>>, dim: usize, group: &[usize]) {
    for s in [T::one(), -T::one()] {
        let mut d = vec![T::zero(); dim];
        for &j in group {
            d[j] = s;
        }
        dirs.push(d);
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]` down to a
/// bracket of width `tol`; returns the midpoint of the final bracket.
pub fn golden_section<T: Real>(mut f: impl FnMut(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    (a + b) * T::lit(0.5)
}

/// Radical inverse of `index` in `base` (van der Corput sequence).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * inv;
        index /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Halton point number `index` in `[0, 1)^dim` (dimensions beyond the prime
/// table reuse bases with a scrambled index).
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let base = PRIMES[j % PRIMES.len()];
            let idx = index + (j / PRIMES.len()) as u64 * 7919;
            radical_inverse(idx, base)
        })
        .collect()
}
