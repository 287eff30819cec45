//! Exact ranges of `sin`, `cos` and `sin^2` over closed intervals.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Whether `a + period * n` lies in `[lo, hi]` for some integer `n`.
fn hits(a: f64, period: f64, lo: f64, hi: f64) -> bool {
    let n = ((lo - a) / period).ceil();
    a + period * n <= hi
}

/// `(min, max)` of `sin` on `[lo, hi]`.
pub(crate) fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    let (a, b) = (lo.sin(), hi.sin());
    let mut min = a.min(b);
    let mut max = a.max(b);
    if hits(FRAC_PI_2, TAU, lo, hi) {
        max = 1.0;
    }
    if hits(-FRAC_PI_2, TAU, lo, hi) {
        min = -1.0;
    }
    (min, max)
}

pub(crate) fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    sin_range(lo + FRAC_PI_2, hi + FRAC_PI_2)
}

/// `sin^2 u = (1 - cos 2u) / 2`.
pub(crate) fn sin_squared_range(lo: f64, hi: f64) -> (f64, f64) {
    let (cmin, cmax) = cos_range(2.0 * lo, 2.0 * hi);
    ((1.0 - cmax) / 2.0, (1.0 - cmin) / 2.0)
}

/// Upper end of `sin^2` on `[lo, hi]`; attains 1 at odd multiples of pi/2.
pub(crate) fn sin_squared_sup(lo: f64, hi: f64) -> f64 {
    if hits(FRAC_PI_2, PI, lo, hi) {
        1.0
    } else {
        sin_squared_range(lo, hi).1
    }
}
