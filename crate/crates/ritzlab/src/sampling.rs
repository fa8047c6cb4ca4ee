//! Deterministic low-discrepancy sequences.
//!
//! All quasi-random sampling in the crate uses the Halton sequence in bases
//! (2, 3) with a seed acting as a start offset, so repeated runs with the
//! same configuration produce identical samples.

use crate::geometry::Point2;

/// Radical-inverse (van der Corput) value of `i` in the given base.
pub fn van_der_corput(mut i: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut denom = 1.0;
    while i > 0 {
        denom *= base as f64;
        result += (i % base) as f64 / denom;
        i /= base;
    }
    result
}

/// The `n`-th Halton point in bases (2, 3), in the unit square.
pub fn halton(n: u64) -> (f64, f64) {
    (van_der_corput(n, 2), van_der_corput(n, 3))
}

/// Iterator of Halton points mapped into the rectangle `[lo, hi]`,
/// starting at index `seed + 1` (index 0 is degenerate).
pub struct HaltonRect {
    next: u64,
    lo: Point2,
    hi: Point2,
}

impl HaltonRect {
    pub fn new(lo: Point2, hi: Point2, seed: u64) -> Self {
        HaltonRect {
            next: seed + 1,
            lo,
            hi,
        }
    }
}

impl Iterator for HaltonRect {
    type Item = Point2;
    fn next(&mut self) -> Option<Point2> {
        let (u, v) = halton(self.next);
        self.next += 1;
        Some(Point2::new(
            self.lo.x + u * (self.hi.x - self.lo.x),
            self.lo.y + v * (self.hi.y - self.lo.y),
        ))
    }
}

/// First `m` van der Corput base-2 values; nested: the first `m` values are
/// a prefix of the first `m' > m`, so enriching a sampling family with a
/// larger `m` only adds members.
pub fn nested_offsets(m: usize) -> Vec<f64> {
    (1..=m as u64).map(|i| van_der_corput(i, 2)).collect()
}
