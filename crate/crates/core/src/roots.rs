//! Derivative-free bracketed root finding.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 400;

/// Finds a root of `f` in `[lo, hi]` with the Illinois variant of regula
/// falsi, falling back to bisection whenever the secant step stalls.
///
/// Iterates until the bracket collapses to adjacent floating-point values or
/// `f` vanishes exactly, so the result is reproducible bit-for-bit.
pub fn illinois<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    // -1: last update moved lo, +1: moved hi.
    let mut side = 0i8;
    for _ in 0..MAX_ITERATIONS {
        let width = hi - lo;
        let mid = lo + 0.5 * width;
        if mid <= lo || mid >= hi {
            return Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi });
        }
        let mut x = hi - f_hi * width / (f_hi - f_lo);
        // Keep the trial well inside the bracket; otherwise bisect.
        let margin = 1e-3 * width;
        if !(x > lo + margin && x < hi - margin) {
            x = mid;
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.is_nan() {
            return Err(Error::RootNotConverged {
                lo,
                hi,
                iterations: 0,
            });
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::RootNotConverged {
        lo,
        hi,
        iterations: MAX_ITERATIONS,
    })
}

/// Locates the boundary of a monotone predicate: `holds(lo)` and
/// `!holds(hi)` (or the reverse) on entry, and the returned bracket has width
/// at most `tolerance`.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(
    mut holds: P,
    mut lo: f64,
    mut hi: f64,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let at_lo = holds(lo);
    let at_hi = holds(hi);
    if at_lo == at_hi {
        let v = |b: bool| if b { 1.0 } else { -1.0 };
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: v(at_lo),
            f_hi: v(at_hi),
        });
    }
    while hi - lo > tolerance {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}
